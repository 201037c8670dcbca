"""Shared builders for hand-sized networks and requests."""

from pess.service import UP, Chain, ServiceRequest, VsnfSpec
from pess.topology import PhysicalLink, PhysicalNetwork, PhysicalNode


def build_net(caps, edges, *, bandwidth=10**10, delay=0.0, queuing=0.0, regions=None):
    """Network from per-node capacities and (a, b) or (a, b, overrides) edges."""
    nodes = [PhysicalNode(i, int(c), queuing) for i, c in enumerate(caps)]
    links = []
    for idx, edge in enumerate(edges):
        a, b, *rest = edge
        over = rest[0] if rest else {}
        links.append(
            PhysicalLink(
                idx,
                (a, b),
                int(over.get("bandwidth", bandwidth)),
                float(over.get("delay", delay)),
            )
        )
    return PhysicalNetwork(nodes, links, regions)


def path_net(caps, **kw):
    """Line topology 0-1-2-..., one node per capacity entry."""
    return build_net(caps, [(i, i + 1) for i in range(len(caps) - 1)], **kw)


def vsnf(name="snort", gamma=9.5, stateful=False, region=None):
    return VsnfSpec(name, gamma, stateful, region)


def chain(*vsnfs, direction=UP, beta=10**6, lam=0.2, sigma=8000.0, pi=0.0):
    return Chain(direction, tuple(vsnfs), beta, lam, sigma, pi)


def request(ep1, ep2, *chains, groups=(), veto=()):
    return ServiceRequest(
        ep1=ep1,
        ep2_set=frozenset(ep2),
        chains=tuple(chains),
        stateful_groups=tuple(groups),
        veto=frozenset(veto),
    )
