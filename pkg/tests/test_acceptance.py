"""End-to-end acceptance suite.

Each test pins one of the package-level guarantees: the formal-series
identities at full order, the extremal-coefficient theorems, the
coefficient-comparison lemma, the push-forward oracle, parity vanishing,
edge-series well-definedness, chain closure, boundary consistency, the
truncated divisor-exponential identity, the frame-matrix ODE, and
byte-level determinism.
"""

import json
import random
import time
from fractions import Fraction

import pytest

from tautrels.catalog import (
    bernoulli_kernel_coefficients,
    hyper_A,
    hyper_B,
    ionel_coefficient_pair,
    phi_family,
    s_matrix,
    s_matrix_ode_residuals,
    series_C,
    uy_expansion,
)
from tautrels.classes import (
    TautClass,
    divisor_exp_check,
    weight_reduce,
)
from tautrels.cli import main as cli_main
from tautrels.graphs import StableGraph, WeightData
from tautrels.relations import (
    extended_fz_relation,
    fz_relation,
    open_fz_relation,
    open_sq_relation,
    pushforward_oracle,
    verify_chain,
)
from tautrels.series import Ring, VarSpec

W0 = WeightData(())


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.monotonic()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.monotonic() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, (
                f"took {self.elapsed:.1f}s, limit {self.limit}s"
            )


def test_01_series_identity_suite():
    with Timer(10):
        A, B = hyper_A(20), hyper_B(20)
        combo = A * B.substitute({"t": -1}) + A.substitute({"t": -1}) * B + 2
        assert combo.is_zero()

        fam = phi_family(20, 10)
        ring = fam["ring"]

        def D(f):
            return f.x_d_dx("x").mul_var("t")

        delta = fam["delta"]
        residual = D(delta) + delta * delta - ring.var("x") - Fraction(1, 4)
        assert residual.is_zero()

        phi = fam["Phi"]
        assert (D(phi - D(phi)) + ring.var("x") * phi).is_zero()


def test_02_extremal_coefficient_theorems():
    with Timer(30):
        data = uy_expansion(5, 12, 12)
        log_a = hyper_A(12).log()
        for k in range(1, 13):
            assert data["c"].get(k, {}).get(k, Fraction(0)) == \
                log_a.coefficient(t=k)
        for i in range(1, 6):
            ci = series_C(i, 12)
            b = data["b"][i]
            cc = data["cc"][i]
            for m in range(13):
                value = Fraction(0)
                if m == i - 1:
                    value += b.get(i - 1, Fraction(0))
                k = m - i
                if k >= 0:
                    value -= cc.get(k, {}).get(k + i, Fraction(0))
                assert (2 ** i) * value == ci.coefficient(t=m), (i, m)


def test_03_coefficient_comparison_lemma():
    rng = random.Random(20260826)
    src = Ring([VarSpec("t", -3, 8), VarSpec("x", 0, 6)])
    for _ in range(100):
        f = src.zero()
        for _ in range(rng.randint(1, 7)):
            f = f + src.monomial(
                Fraction(rng.randint(-9, 9), rng.randint(1, 6)),
                t=rng.randint(-3, 7),
                x=rng.randint(0, 5),
            )
        for r in range(7):
            for d in range(5):
                lhs, rhs = ionel_coefficient_pair(f, r, d)
                assert lhs == rhs, (r, d)


def test_04_pushforward_oracle():
    with Timer(60):
        rows = pushforward_oracle(d_max=3)
        assert rows
        for name, ok, detail in rows:
            assert ok, (name, detail)


def test_05_parity_vanishing_grid():
    checked = 0
    for g in (1, 2, 3, 4):
        for d in range(3):
            for r in range(6):
                for a in [(), (0,), (1,), (2,), (1, 1)]:
                    n = len(a)
                    if 2 * g - 2 + n * Fraction(1, 10) <= 0:
                        continue
                    if (g + r + sum(a)) % 2 != 0:
                        continue
                    w = WeightData(tuple(Fraction(1, 10) for _ in range(n)))
                    rel = open_sq_relation(g, w, r, d, a, enforce=False)
                    assert rel.is_zero, (g, d, r, a)
                    checked += 1
    assert checked > 100


def test_06_edge_series_divisibility():
    # the two-variable numerator is divisible by 2(t1 + t2) to order 15
    order = 15
    ring = Ring([VarSpec("t1", 0, order + 1), VarSpec("t2", 0, order + 1)])
    a_inv = hyper_A(order + 1).inverse()
    c1 = series_C(1, order + 1)

    def at(f, z, var):
        return f.substitute({"t": z * ring.var(var)})

    for z1 in (1, -1):
        for z2 in (1, -1):
            numerator = (
                Fraction(z1 + z2) * at(a_inv, z1, "t1") * at(a_inv, z2, "t2")
                + z1 * at(c1, z1, "t1")
                + z2 * at(c1, z2, "t2")
            )
            divisor = (ring.var("t1") + ring.var("t2")) * 2
            quotient = numerator.divide_exact(divisor)
            assert (numerator - quotient * divisor).is_zero(), (z1, z2)

    # the x-refined bracket numerator is divisible by (t1 + t2) to order 12
    order, x_order = 12, 3
    ring = Ring(
        [
            VarSpec("t1", 0, order + 1),
            VarSpec("t2", 0, order + 1),
            VarSpec("x", 0, x_order + 1),
        ]
    )
    fam = phi_family(order, x_order)

    def at_xy(f, z, var):
        return f.substitute({"t": z * ring.var(var), "x": ring.var("x")})

    for z1 in (1, -1):
        for z2 in (1, -1):
            head = Fraction(z1 + z2, 2) * (
                -at_xy(fam["gammaPrime"], z1, "t1")
                - at_xy(fam["gammaPrime"], z2, "t2")
            ).exp()
            numerator = (
                head
                + z1 * at_xy(fam["delta"], z1, "t1")
                + z2 * at_xy(fam["delta"], z2, "t2")
            )
            numerator.divide_exact(ring.var("t1") + ring.var("t2"))


def test_07_chain_closure():
    for g, r in [(3, 2), (4, 3), (5, 4)]:
        for name, ok, detail in verify_chain(g, r):
            assert ok, (g, r, name, detail)
    # the (3, 2) relation is the classical two-generator combination
    rel = open_fz_relation(3, 0, 2)
    smooth = StableGraph((3,), (), ())
    expected = TautClass(3, W0)
    expected.add_word_term(smooth, [[("kappa", 1), ("kappa", 1)]],
                           Fraction(25, 72))
    expected.add_word_term(smooth, [[("kappa", 2)]], -5)
    key = min(rel.terms)
    scale = expected.terms[key] / rel.terms[key]
    assert rel.scale(scale) == expected


def test_08_boundary_consistency():
    # the 0-edge part of the graph sum doubles the open form (the two
    # colorings of the smooth graph contribute equally under the parity
    # condition)
    for g in (2, 3, 4):
        for r in (1, 2, 3, 4):
            for S in [(), (1,), (1, 2)]:
                if (g - 1 + r + len(S)) % 2 != 0:
                    continue
                if 3 * r < g + 1 + len(S):
                    continue
                n = len(S)
                w = WeightData(tuple(Fraction(1, 8) for _ in range(n)))
                zero_edge = fz_relation(g, w, r, S, max_edges=0)
                open_form = open_fz_relation(g, n, r, S, weights=w)
                assert zero_edge == open_form.scale(2), (g, r, S)

    # weight-reduction naturality on ten seeded weight pairs
    rng = random.Random(20260826)
    for _ in range(10):
        g = rng.choice([2, 3])
        n = rng.choice([1, 2])
        r = g - 1 if (g - 1) % 2 == 0 else g
        while (g - 1 + r) % 2 != 0 or 3 * r < g + 1:
            r += 1
        hi = [Fraction(rng.randrange(1, 6), 20) for _ in range(n)]
        lo = [v / 2 for v in hi]
        w_hi, w_lo = WeightData(tuple(hi)), WeightData(tuple(lo))
        assert weight_reduce(fz_relation(g, w_hi, r), w_lo) == \
            fz_relation(g, w_lo, r), (g, n, hi)

    # the empty partition degenerates to the plain relation
    w = WeightData((Fraction(1, 10),))
    assert extended_fz_relation(3, w, 2, (), ()) == fz_relation(3, w, 2)


def test_09_divisor_exponential_truncations():
    for genus in (2, 3):
        for i_max in (1, 2):
            kernel = bernoulli_kernel_coefficients(i_max)
            f_poly = {(2 * i - 1, 2 * i - 1): -coeff
                      for i, coeff in kernel.items()}
            lhs, rhs = divisor_exp_check(genus, W0, f_poly, max_codim=2)
            assert lhs == rhs, (genus, i_max)


def test_10_frame_matrix():
    sm = s_matrix(8, 5, 2)
    for i in range(2):
        for j in range(2):
            assert sm["S"][(i, j)].coefficient() == (1 if i == j else 0)
    for residual in s_matrix_ode_residuals(sm):
        assert residual.is_zero()


def test_11_determinism(tmp_path, monkeypatch):
    # thread count must not change the serialized chain-closure relations
    for g, r in [(3, 2), (4, 3), (5, 4)]:
        blobs = {fz_relation(g, W0, r, threads=k).dumps() for k in (1, 4, 8)}
        assert len(blobs) == 1, (g, r)

    # cold and warm cache must emit byte-identical files
    cache = tmp_path / "cache"
    monkeypatch.setenv("TAUTRELS_CACHE", str(cache))
    files = []
    for tag in ("cold", "warm"):
        out = tmp_path / f"{tag}.json"
        code = cli_main([
            "relations", "gen", "--genus", "3", "--codim", "2",
            "--out", str(out),
        ])
        assert code == 0
        files.append(out.read_bytes())
    assert files[0] == files[1]
