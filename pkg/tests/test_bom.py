from __future__ import annotations

import itertools
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_map
from fibreplan.bom import ROOT_BRANCH, branch_demands, build_bill, cable_waste, select_cables, select_splitters
from fibreplan.errors import ConfigurationError
from fibreplan.fitness import Caches
from fibreplan.validator import DesignSolution, check_capacity


def branch_instance(branch_sizes):
    """One chain of PDOs per branch out of the root, 11 SDUs per PDO (less on the last).

    Returns the map and a solution serving every client on its own PDO.
    """
    route = [(0, 0.0, 0.0)]
    edges = []
    clients = []
    assignments = {}
    nid, cid = 1, 1000
    for b, demand in enumerate(branch_sizes):
        direction = (1.0, 0.0) if b % 2 == 0 else (0.0, 1.0)
        sign = 1 if b < 2 else -1
        prev = 0
        step = 0
        while demand > 0:
            step += 1
            x, y = sign * 200.0 * step * direction[0], sign * 200.0 * step * direction[1]
            route.append((nid, x, y))
            edges.append((prev, nid))
            take = min(11, demand)
            for j in range(take):
                clients.append((cid, x + 5 + j, y + 5))
                assignments[cid] = nid
                cid += 1
            demand -= take
            prev = nid
            nid += 1
    net = make_map(route, edges, clients)
    return net, DesignSolution(tuple(sorted(set(assignments.values()))), assignments)


class TestSplitters:
    @pytest.mark.parametrize("demand,expected", [(121, 2), (64, 1), (65, 2), (0, 0), (1, 1)])
    def test_at_64(self, demand, expected):
        assert select_splitters(demand, 64) == expected

    def test_zero_ratio(self):
        with pytest.raises(ValueError):
            select_splitters(10, 0)

    @given(st.integers(1, 10_000), st.sampled_from([4, 8, 16, 32, 64]))
    def test_tight(self, demand, ratio):
        n = select_splitters(demand, ratio)
        assert n * ratio >= demand
        assert (n - 1) * ratio < demand


class TestCables:
    def test_forty_seven(self):
        chosen = select_cables(47, (16, 32))
        assert chosen == Counter({32: 1, 16: 1})
        assert cable_waste(47, chosen) == 1

    def test_zero(self):
        assert select_cables(0, (16, 32)) == Counter()

    def test_empty_catalog(self):
        with pytest.raises(ConfigurationError):
            select_cables(10, ())

    def test_exhaustive_against_two_type_search(self):
        for demand in range(1, 201):
            chosen = select_cables(demand, (16, 32))
            capacity = sum(k * v for k, v in chosen.items())
            assert capacity >= demand
            waste = capacity - demand
            assert waste < 16
            best = min(
                16 * a + 32 * b - demand
                for a, b in itertools.product(range(14), range(8))
                if 16 * a + 32 * b >= demand
            )
            assert waste == best, demand
            for size in chosen:
                assert capacity - size < demand, (demand, chosen)

    def test_unsorted_catalog(self):
        assert select_cables(47, (32, 16)) == Counter({32: 1, 16: 1})


class TestBranches:
    def test_single_branch_121(self, rules):
        net, sol = branch_instance([121])
        caches = Caches(net, rules)
        demands = branch_demands(sol, net, caches)
        assert list(demands.values()) == [121]
        assert check_capacity(sol, net, rules) == []
        bill = build_bill(sol, net, rules, caches)
        assert bill.splitters == {64: 2}
        assert bill.total_demand == 121

    def test_two_branches(self, rules):
        net, sol = branch_instance([47, 74])
        caches = Caches(net, rules)
        demands = branch_demands(sol, net, caches)
        assert sorted(demands.values()) == [47, 74]
        bill = build_bill(sol, net, rules, caches)
        assert sum(bill.branch_demand.values()) == sum(c.demand for c in net.clients)
        by_demand = {d: bill.branch_spare[b] for b, d in bill.branch_demand.items()}
        assert by_demand[47] == 1
        assert by_demand[74] == 6  # 2 x 32FO + 1 x 16FO = 80
        assert bill.cables == {16: 2, 32: 3}
        assert bill.splitters == {64: 2}

    def test_no_active_pdos(self, rules, line_map):
        sol = DesignSolution((), {c.id: -1 for c in line_map.clients})
        assert branch_demands(sol, line_map, Caches(line_map, rules)) == {}
        bill = build_bill(sol, line_map, rules, Caches(line_map, rules))
        assert bill.splitters == {} and bill.cables == {}

    def test_pdo_at_root(self, rules):
        net = make_map([(0, 0, 0), (1, 50, 0)], [(0, 1)], [(5, 5, 5), (6, 50, 5)])
        sol = DesignSolution((0, 1), {5: 0, 6: 1})
        demands = branch_demands(sol, net, Caches(net, rules))
        assert demands == {ROOT_BRANCH: 1, "0-1": 1}

    def test_bill_document(self, rules):
        net, sol = branch_instance([47])
        doc = build_bill(sol, net, rules, Caches(net, rules)).to_dict()
        assert doc["splitters"] == {"1:64": 1}
        assert doc["cables"] == {"16FO": 1, "32FO": 1}
        assert doc["branches"][0]["spare_fibres"] == 1
