"""Frank-Wolfe equilibrium solver against closed-form and bisection oracles."""

import io
import math
import random

import numpy as np
import pytest

from roadworks import (
    DataError,
    DemandMatrix,
    Link,
    Network,
    SolverError,
    SolverSettings,
    all_or_nothing,
    bpr_integral,
    bpr_latency,
    format_flow_file,
    relative_gap,
    solve_ue,
    solve_with,
    vht,
    write_flow_file,
)

from netfixtures import two_link_demand, two_link_net
from oracles import independent_gap, latency, two_link_flows


def test_bpr_latency_values():
    link = Link(1, 2, 1000.0, 10.0, 0.15, 4.0)
    assert bpr_latency(link, 0.0) == 10.0
    assert bpr_latency(link, 1000.0) == pytest.approx(11.5)
    assert bpr_latency(link, 1500.0) == pytest.approx(17.59375)
    with pytest.raises(DataError):
        bpr_latency(link, -1.0)


def test_bpr_integral_matches_quadrature():
    rng = random.Random(99)
    for _ in range(40):
        link = Link(
            1,
            2,
            rng.uniform(100, 5000),
            rng.uniform(1, 30),
            rng.uniform(0, 1),
            rng.choice([1.0, 2.0, 4.0]),
        )
        f = rng.uniform(0, 3 * link.capacity)
        n = 20000
        xs = [f * (i + 0.5) / n for i in range(n)]
        riemann = sum(bpr_latency(link, x) for x in xs) * f / n
        assert bpr_integral(link, f) == pytest.approx(riemann, rel=1e-6)


def test_vht_is_flow_weighted_time():
    assert vht([2.0, 3.0], [5.0, 7.0]) == 31.0


def test_relative_gap_definition():
    flows = np.array([10.0, 0.0])
    costs = np.array([4.0, 3.0])
    aon = np.array([0.0, 10.0])
    # (40 - 30) / 40
    assert relative_gap(flows, costs, aon) == pytest.approx(0.25)


def test_corner_instance_matches_oracle():
    net = two_link_net()
    demand = two_link_demand(1500.0)
    want = two_link_flows(net, 1500.0)
    a = solve_ue(net, demand, target_gap=1e-8)
    assert a.relative_gap <= 1e-8
    assert a.flows[0] == pytest.approx(want[0], abs=1e-4)
    assert a.flows[1] == pytest.approx(want[1], abs=1e-4)
    assert want == (1500.0, 0.0)  # cheap link stays faster even with all flow


def test_interior_instance_matches_oracle():
    net = two_link_net()
    demand = two_link_demand(2500.0)
    x1, x2 = two_link_flows(net, 2500.0)
    assert 0.0 < x1 < 2500.0
    a = solve_ue(net, demand, target_gap=1e-10)
    assert a.flows[0] == pytest.approx(x1, abs=1e-4)
    assert a.flows[1] == pytest.approx(x2, abs=1e-4)
    # equal latencies is the interior equilibrium condition
    assert latency(net.links[0], x1) == pytest.approx(latency(net.links[1], x2), rel=1e-9)


def test_random_two_link_instances_match_oracle():
    rng = random.Random(424242)
    for _ in range(30):
        net = two_link_net(
            t1=rng.uniform(1, 30),
            t2=rng.uniform(1, 30),
            q1=rng.uniform(200, 3000),
            q2=rng.uniform(200, 3000),
            alpha=rng.uniform(0.05, 1.0),
            beta=rng.choice([1.0, 2.0, 4.0]),
        )
        total = rng.uniform(10, 5000)
        x1, x2 = two_link_flows(net, total)
        a = solve_ue(net, two_link_demand(total), target_gap=1e-10, max_iters=20000)
        assert a.flows[0] == pytest.approx(x1, abs=1e-3)
        assert a.flows[1] == pytest.approx(x2, abs=1e-3)


def test_gap_verified_independently(desk):
    a = solve_ue(desk.net, desk.demand, target_gap=1e-6)
    assert a.relative_gap <= 1e-6
    assert independent_gap(desk.net, desk.demand, a.flows) <= 2e-6


def test_beckmann_never_increases(desk):
    a = solve_ue(desk.net, desk.demand, target_gap=1e-8)
    hist = a.beckmann_history
    assert len(hist) == a.iterations
    for before, after in zip(hist, hist[1:]):
        assert after <= before + 1e-12 * abs(before)


def test_aon_loads_everything_on_shortest_route(desk):
    costs = [link.free_flow_time for link in desk.net.links]
    flows = all_or_nothing(desk.net, desk.demand, costs)
    # free-flow shortest route is the 30-minute north corridor
    assert list(flows) == [1000.0, 1000.0, 1000.0, 0.0, 0.0, 0.0]


def test_aon_conserves_demand(sioux):
    costs = [link.free_flow_time for link in sioux.net.links]
    flows = all_or_nothing(sioux.net, sioux.demand, costs)
    out = {n: 0.0 for n in range(1, sioux.net.node_count + 1)}
    net_in = {n: 0.0 for n in range(1, sioux.net.node_count + 1)}
    for link, f in zip(sioux.net.links, flows):
        out[link.from_node] += f
        net_in[link.to_node] += f
    starts = {n: 0.0 for n in out}
    ends = {n: 0.0 for n in out}
    for (r, s), q in sioux.demand.entries.items():
        starts[r] += q
        ends[s] += q
    for n in out:
        assert net_in[n] - out[n] == pytest.approx(ends[n] - starts[n], abs=1e-6)


def test_zero_demand_short_circuits():
    net = two_link_net()
    a = solve_ue(net, DemandMatrix({}), target_gap=1e-8)
    assert list(a.flows) == [0.0, 0.0]
    assert a.relative_gap == 0.0
    assert a.iterations == 0
    b = solve_ue(net, DemandMatrix({(1, 2): 0.0}), target_gap=1e-8)
    assert list(b.flows) == [0.0, 0.0]


def test_disconnected_demand_is_a_solver_error():
    net = Network(
        node_count=3, links=(Link(1, 2, 1000.0, 10.0, 0.15, 4.0),), zone_count=3
    )
    with pytest.raises(SolverError, match=r"\(1,3\)"):
        solve_ue(net, DemandMatrix({(1, 3): 5.0}), target_gap=1e-4)


def test_demand_outside_zone_range():
    net = two_link_net()
    with pytest.raises(DataError):
        solve_ue(net, DemandMatrix({(1, 99): 5.0}), target_gap=1e-4)


def test_truncation_reports_honest_gap():
    net = two_link_net()
    a = solve_ue(net, two_link_demand(2500.0), target_gap=1e-30, max_iters=1)
    assert a.iterations == 1
    assert a.relative_gap > 1e-6  # one step cannot reach equilibrium here
    assert len(a.beckmann_history) == 1
    assert len(a.gap_history) == 1


def test_repeat_solves_are_bit_identical(desk):
    a = solve_ue(desk.net, desk.demand, target_gap=1e-6)
    b = solve_ue(desk.net, desk.demand, target_gap=1e-6)
    assert np.array_equal(a.flows, b.flows)
    assert a.vht == b.vht


def test_thread_count_does_not_change_flows(sioux):
    one = solve_ue(sioux.net, sioux.demand, target_gap=1e-3, threads=1)
    three = solve_ue(sioux.net, sioux.demand, target_gap=1e-3, threads=3)
    assert np.array_equal(one.flows, three.flows)
    assert one.iterations == three.iterations


def test_solve_with_mirrors_solve_ue(desk):
    settings = SolverSettings(target_gap=1e-6, max_iters=500, algorithm="slf-lll")
    a = solve_with(desk.net, desk.demand, settings)
    b = solve_ue(desk.net, desk.demand, target_gap=1e-6, max_iters=500, algorithm="slf-lll")
    assert np.array_equal(a.flows, b.flows)


def test_algorithm_choice_changes_nothing(desk):
    flows = None
    for algorithm in ("dijkstra", "bellman-ford", "desopo-pape-lll", "slf-lll"):
        a = solve_ue(desk.net, desk.demand, target_gap=1e-7, algorithm=algorithm)
        if flows is None:
            flows = a.flows
        else:
            assert np.array_equal(a.flows, flows)


def test_flow_file_format(desk, tmp_path):
    a = solve_ue(desk.net, desk.demand, target_gap=1e-6)
    text = format_flow_file(desk.net, a)
    lines = text.strip().splitlines()
    assert lines[0].startswith("~ vht ")
    assert "relative_gap" in lines[0]
    assert len(lines) == 1 + len(desk.net.links)
    fields = lines[1].split()
    assert int(fields[0]) == desk.net.links[0].from_node
    assert float(fields[2]) == pytest.approx(a.flows[0], abs=1e-6)

    path = tmp_path / "flows.txt"
    write_flow_file(str(path), desk.net, a)
    assert path.read_text() == text
    buf = io.StringIO()
    write_flow_file(buf, desk.net, a)
    assert buf.getvalue() == text


def test_settings_validation():
    net = two_link_net()
    demand = two_link_demand(100.0)
    with pytest.raises(DataError):
        solve_ue(net, demand, target_gap=0.0)
    with pytest.raises(DataError):
        solve_ue(net, demand, target_gap=1e-4, max_iters=0)
    with pytest.raises(DataError):
        solve_ue(net, demand, target_gap=1e-4, threads=0)
    with pytest.raises(DataError):
        solve_ue(net, demand, target_gap=1e-4, algorithm="bogus")
