"""Where to put external excitation.

Data are informative for this method when enough vertex-disjoint paths run
from the noise and excitation sources to the node signals. With noise alone
the six-node network falls two paths short; exciting nodes 5 and 6 closes
the gap.
"""
import json

from netid import check_prop3, check_prop4, informativity_report, six_node_network
from netid import suggest_excitation

model = six_node_network("all")

rep = check_prop3(model, r_assignment=[])
print(f"noise only: {rep.achieved} of {rep.required} disjoint paths")

sug = suggest_excitation(model)
print("suggested excitation:", sug.labels())

rep = check_prop3(model, r_assignment=sug.nodes)
print(f"with {sug.labels()}: {rep.achieved} of {rep.required} paths")
for path in rep.witness:
    print("   ", " -> ".join(path))

# Per-node condition on the neighbors of node 3, noise only.
rep = check_prop4(model, 2, r_assignment=[])
print("node 3 neighbors reached by", [" -> ".join(p) for p in rep.witness])

print(json.dumps(informativity_report(six_node_network("b"))["prop3"], indent=2))
