"""Tiny hand-built networks shared across test modules."""

from roadworks import DemandMatrix, Link, Network, parse_upgrades


def two_link_net(t1=10.0, t2=20.0, q1=1000.0, q2=1000.0, alpha=0.15, beta=4.0):
    """Two parallel links from node 1 to node 2."""
    links = (
        Link(1, 2, q1, t1, alpha, beta),
        Link(1, 2, q2, t2, alpha, beta),
    )
    return Network(node_count=2, links=links, zone_count=2)


def two_link_demand(total):
    return DemandMatrix({(1, 2): float(total)})


# Classic 4-node paradox instance: two 2-hop routes 1->2->4 and 1->3->4, each
# one congestible leg (5 + 0.02 f) plus one constant 25-minute leg.  A free
# 2->3 connector makes everyone pile onto both congestible legs.
def braess_net():
    links = (
        Link(1, 2, 1000.0, 5.0, 4.0, 1.0),
        Link(2, 4, 1000.0, 25.0, 0.0, 1.0),
        Link(1, 3, 1000.0, 25.0, 0.0, 1.0),
        Link(3, 4, 1000.0, 5.0, 4.0, 1.0),
    )
    return Network(node_count=4, links=links, zone_count=4)


def braess_demand():
    return DemandMatrix({(1, 4): 1000.0})


BRAESS_UPGRADE_TEXT = """\
# zero-cost connector between the route midpoints
PROJECT bypass 100 new-road
  ADD 2 3 1000 0 0 4 1
"""


def braess_upgrades(net):
    return parse_upgrades(BRAESS_UPGRADE_TEXT, network=net)
