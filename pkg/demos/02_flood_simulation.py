# %% [markdown]
# # Flooding a mesh
#
# Every node relays every new message to every neighbour exactly once. This
# script floods a small-world graph and looks at the cost and the latency.

# %%
import statistics

import networkx as nx

from efpix.relay import MILLISECOND
from efpix.simulator import Latency, ScenarioEvent, SimConfig, Topology, run_simulation

g = nx.connected_watts_strogatz_graph(60, 4, 0.2, seed=7)
g = nx.relabel_nodes(g, {i: f"n{i}" for i in g})
topo = Topology.from_edges(g.edges(), latency=Latency(2 * MILLISECOND, 40 * MILLISECOND))

events = [ScenarioEvent.send(k * 200 * MILLISECOND, f"n{k}", f"n{59 - k}", b"message %d" % k) for k in range(20)]
metrics = run_simulation(topo, events, seed=1, config=SimConfig())

# %% [markdown]
# With echo suppression each node sends to all neighbours except the one it
# heard the message from, so one flood costs about 2|E| - n + 1 transmissions.

# %%
per_message = [m.transmissions for m in metrics.messages]
print("edges:", g.number_of_edges(), "nodes:", g.number_of_nodes())
print("transmissions per message:", set(per_message))
print("bound 2|E| - n + 1 =", 2 * g.number_of_edges() - g.number_of_nodes() + 1)
print("duplicate drops:", metrics.duplicate_drops)

# %% [markdown]
# Delivery latency follows the fastest path through the random link delays.

# %%
latencies = [m.latency / MILLISECOND for m in metrics.messages if m.delivered]
print(f"delivered {len(latencies)}/{len(metrics.messages)}")
print(f"latency ms: median {statistics.median(latencies):.1f}, max {max(latencies):.1f}")
hops = [nx.shortest_path_length(g, m.sender, m.recipient) for m in metrics.messages]
print("hop counts:", sorted(hops))
