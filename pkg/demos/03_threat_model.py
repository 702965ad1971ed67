# %% [markdown]
# # Three adversaries
#
# Replayers re-broadcast old frames, droppers swallow everything and
# observers record every frame on their links. The library ships a scenario
# runner for each.

# %%
from pathlib import Path

from efpix.relay import SECOND
from efpix.simulator import (
    NodeRole,
    Topology,
    assert_observer_blindness,
    load_scenario,
    run_choke_point,
    run_replay_attack,
)

# %% [markdown]
# ## Replay
#
# A replay inside the dedup window hits neighbours that remember the hash.
# After the window the hash is forgotten, but the timestamp has aged out.

# %%
topo = Topology.from_edges(
    [("s", "a"), ("a", "evil"), ("evil", "b"), ("b", "r"), ("a", "b")],
    roles={"evil": NodeRole.REPLAYER},
)
report = run_replay_attack(topo, sender="s", recipient="r", max_message_age=60 * SECOND)
for phase in report.phases:
    print(phase.phase, "receipts", phase.neighbor_receipts, "dropped", phase.neighbor_duplicate_drops,
          "recipient saw", phase.recipient_outcomes)
print("duplicate deliveries:", report.duplicate_deliveries)

# %% [markdown]
# ## Dropping
#
# A dropper only matters when it is the sole path between two parts of the
# network.

# %%
bridge = Topology.from_edges([("s", "x"), ("x", "d"), ("d", "r")])
detour = Topology.from_edges([("s", "x"), ("x", "d"), ("d", "r"), ("x", "y"), ("y", "r")])
for name, t in (("bridge", bridge), ("detour", detour)):
    c = run_choke_point(t, "d", "s", "r")
    print(f"{name}: separates={c.dropper_separates} delivered={c.delivered_with_dropper}")

# %% [markdown]
# ## Watching
#
# Observers see 580-byte frames with valid hashes and nothing else. Dummy
# traffic has the same shape as real traffic.

# %%
scenario = load_scenario(Path(__file__).parent / "scenarios" / "observed_mesh.json")
metrics = scenario.run()
blind = assert_observer_blindness(metrics, scenario.events)
print("frames captured:", blind.frames_checked, "ok:", blind.ok)
for cls, sizes in blind.size_histogram.items():
    print(f"  {cls:<12} {sizes}")
