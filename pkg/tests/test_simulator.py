import dataclasses
import json
import random

import networkx as nx
import pytest

from efpix.crypto_suite import CipherSuiteId, PowParams
from efpix.errors import ScenarioError
from efpix.relay import MILLISECOND, SECOND, NodeConfig
from efpix.simulator import (
    Edge,
    Latency,
    NodeRole,
    NodeSpec,
    Scenario,
    ScenarioEvent,
    SimConfig,
    Topology,
    assert_observer_blindness,
    load_scenario,
    reachable,
    run_choke_point,
    run_replay_attack,
    run_simulation,
    scenario_from_dict,
    scenario_to_dict,
)

send = ScenarioEvent.send


def graph_topology(g: nx.Graph, **kw) -> Topology:
    return Topology.from_edges(g.edges(), nodes=g.nodes(), **kw)


def connected_graph(n: int, seed: int) -> nx.Graph:
    g = nx.connected_watts_strogatz_graph(n, 4, 0.3, seed=seed)
    return nx.relabel_nodes(g, {i: f"n{i}" for i in g})


# --- topology ----------------------------------------------------------------------

def test_topology_validation():
    with pytest.raises(ScenarioError):
        Topology.from_edges([("a", "a")])
    with pytest.raises(ScenarioError):
        Topology.from_edges([("a", "b"), ("b", "a")])
    with pytest.raises(ScenarioError):
        Topology.from_edges([("a", "x" * 17)])
    with pytest.raises(ScenarioError):
        Topology([NodeSpec("a")], [Edge("a", "b")])
    with pytest.raises(ScenarioError):
        Latency(5, 2)


def test_reachable_matches_networkx():
    rng = random.Random(11)
    for trial in range(10):
        g = nx.gnp_random_graph(30, 0.08, seed=trial)
        g = nx.relabel_nodes(g, str)
        topo = graph_topology(g)
        cut = {str(x) for x in rng.sample(range(30), 3)}
        src = next(n for n in g if n not in cut)
        h = g.subgraph(set(g) - cut)
        assert reachable(topo, src, exclude=cut) == nx.node_connected_component(h, src)


# --- flooding ------------------------------------------------------------------------

def test_two_nodes():
    m = run_simulation(Topology.from_edges([("a", "b")]), [send(0, "a", "b", b"hi")], seed=1)
    rec = m.messages[0]
    assert rec.delivered and rec.delivered_at == MILLISECOND
    assert rec.transmissions == 1
    assert rec.relays == {"a": 1, "b": 1}


def test_fifty_node_flood_against_bfs_oracle():
    g = connected_graph(50, seed=5)
    topo = graph_topology(g)
    m = run_simulation(topo, [send(0, "n0", "n49", b"across the mesh")], seed=2)
    rec = m.messages[0]
    assert rec.delivered
    # every node relays exactly once
    assert rec.relays == {n: 1 for n in g}
    # origin sends deg(origin), everyone else deg - 1 (echo suppression)
    assert rec.transmissions == 2 * g.number_of_edges() - g.number_of_nodes() + 1
    # with unit latency the first copy travels a shortest path
    hops = nx.shortest_path_length(g, "n0", "n49")
    assert rec.latency == hops * MILLISECOND
    assert m.misdeliveries == 0


def test_echo_suppression_off_bound():
    g = connected_graph(30, seed=9)
    node = NodeConfig(pow=PowParams(8), echo_suppression=False)
    m = run_simulation(graph_topology(g), [send(0, "n0", "n29", b"x")], seed=1, config=SimConfig(node=node))
    assert m.messages[0].delivered
    assert m.messages[0].transmissions == 2 * g.number_of_edges()


def test_split_components_do_not_deliver():
    topo = Topology.from_edges([("a", "b"), ("c", "d")])
    m = run_simulation(topo, [send(0, "a", "d", b"x"), send(0, "a", "b", b"y")], seed=0)
    assert not m.messages[0].delivered
    assert m.messages[1].delivered
    assert set(m.messages[0].relays) == {"a", "b"}


def test_non_recipients_see_not_for_me():
    topo = Topology.from_edges([("a", "b"), ("b", "c"), ("c", "d")])
    m = run_simulation(topo, [send(0, "a", "d", b"x")], seed=0)
    rec = m.messages[0]
    assert rec.outcomes == {"b": "NOT_FOR_ME", "c": "NOT_FOR_ME", "d": "DELIVERED"}


def test_deterministic_for_seed():
    g = connected_graph(25, seed=1)
    topo = graph_topology(g, latency=Latency(MILLISECOND, 20 * MILLISECOND))
    events = [send(i * 10 * MILLISECOND, f"n{i}", f"n{24 - i}", b"m%d" % i) for i in range(5)]
    a = run_simulation(topo, events, seed=42).to_json()
    b = run_simulation(topo, events, seed=42).to_json()
    c = run_simulation(topo, events, seed=43).to_json()
    assert a == b
    assert a != c


def test_random_latency_still_delivers_once():
    g = connected_graph(40, seed=3)
    topo = graph_topology(g, latency=Latency(MILLISECOND, 50 * MILLISECOND))
    node = NodeConfig(pow=PowParams(8), relay_delay_max=30 * MILLISECOND)
    m = run_simulation(topo, [send(0, "n3", "n30", b"x")], seed=7, config=SimConfig(node=node))
    assert m.messages[0].delivered
    assert all(v == 1 for v in m.messages[0].relays.values())
    assert m.relay_count == {n: 1 for n in g}


def test_reference_suite_small_run():
    topo = Topology.from_edges([("a", "b"), ("b", "c"), ("a", "c")])
    cfg = SimConfig(suite=CipherSuiteId.REFERENCE_RSA2048_SHA512)
    m = run_simulation(topo, [send(0, "a", "c", b"rsa over the mesh")], seed=0, config=cfg)
    assert m.messages[0].delivered
    assert m.messages[0].outcomes["b"] == "NOT_FOR_ME"


# --- dynamic events -------------------------------------------------------------------

def test_link_down_blocks_and_link_up_restores():
    topo = Topology.from_edges([("a", "b"), ("b", "c")])
    events = [
        ScenarioEvent.link_down(0, "b", "c"),
        send(1, "a", "c", b"first"),
        ScenarioEvent.link_up(SECOND, "b", "c"),
        send(SECOND + 1, "a", "c", b"second"),
    ]
    m = run_simulation(topo, events, seed=0)
    assert [r.delivered for r in m.messages] == [False, True]


def test_frame_in_flight_lost_when_link_drops():
    topo = Topology.from_edges([("a", "b")], latency=Latency(10 * MILLISECOND))
    events = [send(0, "a", "b", b"x"), ScenarioEvent.link_down(5 * MILLISECOND, "a", "b")]
    m = run_simulation(topo, events, seed=0)
    assert not m.messages[0].delivered
    assert m.frames_lost == 1


def test_node_leave_and_join():
    topo = Topology.from_edges([("a", "b"), ("b", "c")])
    events = [
        ScenarioEvent.node_leave(0, "b"),
        send(1, "a", "c", b"x"),
        ScenarioEvent.node_join(SECOND, "b"),
        send(SECOND + 1, "a", "c", b"y"),
    ]
    m = run_simulation(topo, events, seed=0)
    assert [r.delivered for r in m.messages] == [False, True]


def test_offline_node_at_start():
    topo = Topology([NodeSpec("a"), NodeSpec("b", online=False), NodeSpec("c")],
                    [Edge("a", "b"), Edge("b", "c")])
    m = run_simulation(topo, [send(0, "a", "c", b"x")], seed=0)
    assert not m.messages[0].delivered


@pytest.mark.parametrize("event", [
    send(0, "a", "zz", b"x"),
    send(0, "zz", "a", b"x"),
    ScenarioEvent.link_down(0, "a", "c"),
    send(-1, "a", "b", b"x"),
])
def test_bad_events(event):
    topo = Topology.from_edges([("a", "b"), ("b", "c")])
    with pytest.raises(ScenarioError):
        run_simulation(topo, [event])


def test_contact_subset():
    topo = Topology([NodeSpec("a"), NodeSpec("b"), NodeSpec("c")],
                    [Edge("a", "b"), Edge("b", "c")], contacts=[("a", "c")])
    with pytest.raises(ScenarioError):
        run_simulation(topo, [send(0, "a", "b", b"x")])
    m = run_simulation(topo, [send(0, "a", "c", b"x")])
    assert m.messages[0].delivered


def test_event_budget():
    g = connected_graph(20, seed=0)
    with pytest.raises(ScenarioError):
        run_simulation(graph_topology(g), [send(0, "n0", "n5", b"x")], config=SimConfig(max_events=10))


# --- adversaries --------------------------------------------------------------------

def test_dropper_relays_nothing():
    topo = Topology.from_edges([("a", "d"), ("d", "b")], roles={"d": NodeRole.DROPPER})
    m = run_simulation(topo, [send(0, "a", "b", b"x")])
    assert not m.messages[0].delivered
    assert m.messages[0].transmissions == 1


@pytest.mark.parametrize("edges,dropper,separates", [
    ([("s", "d"), ("d", "r")], "d", True),
    ([("s", "d"), ("d", "r"), ("s", "x"), ("x", "r")], "d", False),
    ([("s", "a"), ("a", "d"), ("d", "b"), ("b", "r")], "d", True),
    ([("s", "d"), ("d", "r"), ("s", "r")], "d", False),
    ([("s", "a"), ("s", "b"), ("a", "d"), ("b", "d"), ("d", "r")], "d", True),
])
def test_choke_point(edges, dropper, separates):
    rep = run_choke_point(Topology.from_edges(edges), dropper, "s", "r", seed=3)
    assert rep.dropper_separates is separates
    assert rep.delivered_with_dropper is (not separates)
    assert rep.delivered_control
    assert rep.ok


def test_choke_point_rejects_endpoint_dropper():
    with pytest.raises(ScenarioError):
        run_choke_point(Topology.from_edges([("s", "r")]), "s", "s", "r")


def test_replay_attack_report():
    topo = Topology.from_edges(
        [("s", "x"), ("x", "rp"), ("rp", "y"), ("y", "r"), ("x", "y")],
        roles={"rp": NodeRole.REPLAYER},
    )
    rep = run_replay_attack(topo, seed=1, sender="s", recipient="r")
    assert rep.original_delivered
    assert [p.phase for p in rep.phases] == ["in_window", "post_window"]
    in_window, post = rep.phases
    assert in_window.neighbor_receipts == 2 == in_window.neighbor_duplicate_drops
    assert "REJECTED(TOO_OLD)" in post.recipient_outcomes
    assert rep.duplicate_deliveries == 0
    assert rep.ok


def test_replay_without_replayers_is_empty():
    assert run_replay_attack(Topology.from_edges([("a", "b")])).phases == []


def test_observer_blindness_with_dummies():
    g = connected_graph(12, seed=4)
    roles = {"n5": NodeRole.OBSERVER, "n8": NodeRole.OBSERVER}
    topo = graph_topology(g, roles=roles)
    node = NodeConfig(pow=PowParams(8), dummy_rate=2.0)
    events = [
        send(0, "n0", "n11", b"the launch code is 0000"),
        send(100 * MILLISECOND, "n3", "n7", b"lunch at noon?"),
        send(200 * MILLISECOND, "n11", "n0", b"acknowledged, see you"),
    ]
    m = run_simulation(topo, events, seed=3, config=SimConfig(node=node, dummy_until=2 * SECOND))
    assert all(r.delivered for r in m.messages)
    assert m.dummies_sent > 0
    rep = assert_observer_blindness(m, events)
    assert rep.ok, rep.failures
    assert set(rep.size_histogram) >= {"dummy", "n0->n11"}
    assert {s for h in rep.size_histogram.values() for s in h} == {580}


def test_observer_blindness_catches_leaks():
    topo = Topology.from_edges([("a", "o"), ("o", "b")], roles={"o": NodeRole.OBSERVER})
    events = [send(0, "a", "b", b"plain"), send(1, "b", "a", b"text")]
    m = run_simulation(topo, events)
    assert assert_observer_blindness(m, events).ok
    # plant a leak: a frame containing the plaintext
    frame = bytearray(m.observer_log["o"][0].frame)
    frame[100:105] = b"plain"
    m.observer_log["o"].append(dataclasses.replace(m.observer_log["o"][0], frame=bytes(frame)))
    rep = assert_observer_blindness(m, events)
    assert not rep.ok
    # and a short frame
    m.observer_log["o"].append(dataclasses.replace(m.observer_log["o"][0], frame=bytes(100)))
    assert any("100 bytes" in f for f in assert_observer_blindness(m, events).failures)


def test_dummies_are_never_delivered():
    g = connected_graph(10, seed=2)
    node = NodeConfig(pow=PowParams(8), dummy_rate=5.0)
    m = run_simulation(graph_topology(g), [], seed=1, config=SimConfig(node=node, dummy_until=SECOND))
    assert m.dummies_sent > 0
    assert m.dummy_transmissions > 0
    assert m.misdeliveries == 0
    assert m.messages == []


# --- output and scenario files ---------------------------------------------------------

def test_metrics_csv():
    m = run_simulation(Topology.from_edges([("a", "b")]), [send(0, "a", "b", b"x")])
    lines = m.to_csv().splitlines()
    assert lines[0].startswith("index,sender,recipient")
    assert lines[1].startswith("0,a,b,0,")
    assert len(lines) == 2


SCENARIO = {
    "seed": 7,
    "suite": "mock",
    "node_defaults": {"pow_difficulty_bits": 6},
    "nodes": ["a", "b", {"id": "c", "role": "observer"}, {"id": "d", "config": {"relay_delay_max_ms": 5}}],
    "edges": [
        {"a": "a", "b": "b", "latency_ms": 2},
        {"a": "b", "b": "c", "latency_ms": [1, 4]},
        {"a": "c", "b": "d"},
    ],
    "events": [
        {"at_ms": 0, "kind": "send", "from": "a", "to": "d", "message": "hello d"},
        {"at_ms": 10, "kind": "link_down", "a": "b", "b": "c"},
        {"at_ms": 20, "kind": "send", "from": "a", "to": "d", "message": {"hex": "00ff"}},
    ],
    "expect": [{"message": 0, "delivered": True}, {"message": 1, "delivered": False}],
}


def test_scenario_from_dict_and_check():
    s = scenario_from_dict(SCENARIO)
    assert s.config.node.pow.difficulty_bits == 6
    assert s.topology.spec("d").config == {"relay_delay_max": 5 * MILLISECOND}
    assert s.events[2].message == b"\x00\xff"
    results = s.check(s.run())
    assert all(r["passed"] for r in results)


def test_scenario_round_trip(tmp_path):
    s = scenario_from_dict(SCENARIO)
    doc = scenario_to_dict(s)
    path = tmp_path / "s.json"
    path.write_text(json.dumps(doc))
    again = load_scenario(path)
    assert scenario_to_dict(again) == doc
    assert again.run().to_json() == s.run().to_json()


@pytest.mark.parametrize("doc", [
    {},
    {"nodes": ["a"], "edges": [{"a": "a", "b": "zz"}]},
    {"nodes": ["a", "b"], "edges": [], "events": [{"kind": "teleport", "node": "a"}]},
    {"nodes": ["a", "b"], "edges": [], "events": [{"kind": "send", "from": "a", "to": "b", "message": 5}]},
    {"nodes": ["a"], "node_defaults": {"bogus": 1}},
    {"nodes": ["a", "b"], "edges": [{"a": "a", "b": "b", "latency_ms": [1]}]},
])
def test_bad_scenarios(doc):
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)


def test_load_scenario_errors(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{nope")
    with pytest.raises(ScenarioError):
        load_scenario(p)
    p.write_text("[]")
    with pytest.raises(ScenarioError):
        load_scenario(p)


def test_scenario_dataclass_defaults():
    s = Scenario(Topology.from_edges([("a", "b")]), [send(0, "a", "b", b"x")])
    assert s.run().messages[0].delivered
    assert s.check(s.run()) == []
