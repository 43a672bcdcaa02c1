import numpy as np
import pytest

from andlab.errors import ValidationError
from andlab.model import (AnnulusSpec, Atoms, Bernoulli, BoxSpec, Configuration,
                          Mixture, SiteProfile, Uniform01, distribution_cdf,
                          lattice_sites, sample_configuration)


def brute_force_sites(box):
    """Oracle: scan a bounding integer range for strict membership."""
    lo = [int(np.floor(c - box.side / 2)) - 1 for c in box.center]
    hi = [int(np.ceil(c + box.side / 2)) + 1 for c in box.center]
    out = []
    ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
    import itertools
    for z in itertools.product(*ranges):
        if all(abs(z[i] - box.center[i]) < box.side / 2 for i in range(box.dimension)):
            out.append(z)
    return sorted(out)


class TestLatticeSites:
    def test_interval_examples(self):
        assert lattice_sites(BoxSpec(1, (0.0,), 4.0)).ravel().tolist() == [-1, 0, 1]
        assert lattice_sites(BoxSpec(1, (0.5,), 4.0)).ravel().tolist() == [-1, 0, 1, 2]

    def test_single_interior_point(self):
        assert lattice_sites(BoxSpec(2, (0.0, 0.0), 2.0)).tolist() == [[0, 0]]

    def test_against_membership_scan(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            d = int(rng.integers(1, 4))
            box = BoxSpec(d, tuple(rng.uniform(-3, 3, d)), float(rng.uniform(1.2, 9.0)))
            got = [tuple(s) for s in lattice_sites(box)]
            assert got == brute_force_sites(box)

    def test_odd_side_count(self):
        # open box of odd integer side centered at 0 keeps L points per axis
        for L in (3, 5, 7):
            for d in (1, 2):
                box = BoxSpec(d, tuple([0.0] * d), float(L))
                assert len(lattice_sites(box)) == L**d == len(brute_force_sites(box))

    def test_lexicographic_order(self):
        sites = lattice_sites(BoxSpec(2, (0.0, 0.0), 4.0))
        assert sorted(map(tuple, sites)) == list(map(tuple, sites))


class TestDistributions:
    def test_bernoulli_cdf(self):
        assert distribution_cdf(Bernoulli(0.3), 0.0) == pytest.approx(0.7)
        assert distribution_cdf(Bernoulli(0.3), 1.0) == 1.0
        assert distribution_cdf(Bernoulli(0.3), -0.1) == 0.0

    def test_uniform_cdf(self):
        assert distribution_cdf(Uniform01(), 0.25) == pytest.approx(0.25)

    def test_mixture_cdf(self):
        # 0.5 * Bernoulli(1).cdf(0.5) + 0.5 * Uniform.cdf(0.5) = 0 + 0.25
        mix = Mixture(((0.5, Bernoulli(1.0)), (0.5, Uniform01())))
        assert distribution_cdf(mix, 0.5) == pytest.approx(0.25)

    def test_support_validation(self):
        with pytest.raises(ValidationError):
            Atoms(((-0.1, 1.0),))
        with pytest.raises(ValidationError):
            Atoms(((0.5, 0.7), (0.6, 0.7)))  # weights sum to 1.4

    def test_degenerate_flag(self):
        assert Atoms(((0.0, 1.0),)).is_degenerate
        assert Bernoulli(1.0).is_degenerate
        assert not Bernoulli(0.5).is_degenerate
        assert not Uniform01().is_degenerate

    def test_normalized_support_predicate(self):
        # {0,1} inside the support
        assert Bernoulli(0.5).normalized_support
        assert Atoms(((0.0, 0.5), (1.0, 0.5))).normalized_support
        assert not Atoms(((0.2, 0.5), (0.9, 0.5))).normalized_support


class TestSampling:
    def test_point_mass(self):
        box = BoxSpec(1, (0.0,), 10.0)
        cfg = sample_configuration(Atoms(((0.0, 1.0),)), box, None, 1, 0)
        assert np.all(cfg.values == 0.0)
        assert cfg.degenerate_warning

    def test_reproducible(self):
        box = BoxSpec(2, (0.0, 0.0), 8.0)
        a = sample_configuration(Bernoulli(0.5), box, None, 42, 3)
        b = sample_configuration(Bernoulli(0.5), box, None, 42, 3)
        assert a.to_json() == b.to_json()
        c = sample_configuration(Bernoulli(0.5), box, None, 42, 4)
        assert c.to_json() != a.to_json()

    def test_empirical_mean_within_5_se(self):
        box = BoxSpec(2, (0.0, 0.0), 120.0)  # > 1e4 sites
        for dist in (Bernoulli(0.3), Uniform01(),
                     Mixture(((0.5, Bernoulli(1.0)), (0.5, Uniform01())))):
            cfg = sample_configuration(dist, box, None, 7, 0)
            n = len(cfg.values)
            assert n >= 10**4
            se = cfg.values.std(ddof=1) / np.sqrt(n)
            assert abs(cfg.values.mean() - dist.mean()) <= 5 * max(se, 1e-12)

    def test_free_sites_excluded_from_omega(self):
        box = BoxSpec(1, (0.0,), 10.0)
        free = np.array([[0], [2]])
        cfg = sample_configuration(Uniform01(), box, free, 5, 0)
        omega_sites = {tuple(s) for s in cfg.sites}
        assert (0,) not in omega_sites and (2,) not in omega_sites
        assert len(cfg.sites) + 2 == len(lattice_sites(box))
        # draws at the remaining sites are unchanged by removing free sites
        base = sample_configuration(Uniform01(), box, None, 5, 0)
        base_map = {tuple(s): v for s, v in zip(base.sites, base.values)}
        for s, v in zip(cfg.sites, cfg.values):
            assert base_map[tuple(s)] == v

    def test_free_site_must_be_lattice_site(self):
        box = BoxSpec(1, (0.0,), 10.0)
        with pytest.raises(ValidationError):
            sample_configuration(Uniform01(), box, np.array([[99]]), 0, 0)

    def test_roundtrip_json(self):
        box = BoxSpec(1, (0.0,), 6.0)
        cfg = sample_configuration(Uniform01(), box, np.array([[1]]), 9, 2)
        back = Configuration.from_json(cfg.to_json())
        assert np.array_equal(back.sites, cfg.sites)
        assert np.array_equal(back.values, cfg.values)
        assert np.array_equal(back.free_sites, cfg.free_sites)


class TestSiteProfile:
    def test_defaults_collapse_to_indicator(self):
        p = SiteProfile(u_plus=2.0, delta_plus=1.5)
        assert p.u_minus == 2.0 and p.delta_minus == 1.5
        vals = p.evaluate(np.array([[0.0], [0.74], [0.76]]))
        assert vals.tolist() == [2.0, 2.0, 0.0]

    def test_sandwich_enforced(self):
        bad = SiteProfile(u_plus=1.0, delta_plus=1.0,
                          shape=lambda off: np.full(len(off), 2.0))
        with pytest.raises(ValidationError):
            bad.evaluate(np.array([[0.0]]))

    def test_parameter_ordering(self):
        with pytest.raises(ValidationError):
            SiteProfile(u_plus=1.0, delta_plus=1.0, u_minus=2.0)
        with pytest.raises(ValidationError):
            SiteProfile(u_plus=1.0, delta_plus=0.5, delta_minus=0.7)


class TestRegions:
    def test_annulus_membership(self):
        ann = AnnulusSpec(2, (0.0, 0.0), 2.0, 6.0)
        assert ann.contains(np.array([[2.0, 0.0]]))[0]
        assert not ann.contains(np.array([[0.5, 0.5]]))[0]   # inside the hole
        assert not ann.contains(np.array([[3.5, 0.0]]))[0]   # outside

    def test_annulus_validation(self):
        with pytest.raises(ValidationError):
            AnnulusSpec(1, (0.0,), 4.0, 3.0)
