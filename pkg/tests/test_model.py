import numpy as np
import pytest
from scipy.integrate import quad

from ergohj.model import (
    COMPACT_SUPPORT,
    ProblemSpec,
    build_coefficients,
    conjugate_exponent,
    eval_drift,
    eval_potential,
    load_spec,
    parse_config_text,
    spec_digest,
    validate_spec,
)


def spec_ip(**kw):
    base = dict(m=2.0, d=3, delta=1.0, rho=1.0, a=0.0, eta=2.0, R=1.0)
    base.update(kw)
    return ProblemSpec(**base)


class TestConjugateExponent:
    def test_self_conjugate(self):
        assert conjugate_exponent(2.0) == 2.0

    def test_values(self):
        assert conjugate_exponent(3.0) == 1.5
        assert conjugate_exponent(1.5) == 3.0

    def test_involution(self):
        for m in np.linspace(1.01, 8.0, 37):
            assert conjugate_exponent(conjugate_exponent(m)) == pytest.approx(m, rel=1e-12)

    def test_identity(self):
        for m in (1.2, 1.5, 2.0, 3.0, 7.5):
            ms = conjugate_exponent(m)
            assert abs(1.0 / m + 1.0 / ms - 1.0) < 1e-14

    def test_domain(self):
        with pytest.raises(ValueError):
            conjugate_exponent(1.0)
        with pytest.raises(ValueError):
            conjugate_exponent(0.5)


class TestValidateSpec:
    def test_ok(self):
        assert validate_spec(spec_ip()) == []

    def test_m_boundary(self):
        out = validate_spec(spec_ip(m=1.0))
        assert any("m must exceed 1" in v for v in out)

    def test_eta_boundary(self):
        out = validate_spec(spec_ip(eta=0.0))
        assert any("eta must be positive" in v for v in out)

    def test_rho_R_d(self):
        assert any("rho" in v for v in validate_spec(spec_ip(rho=0.0)))
        assert any("R" in v for v in validate_spec(spec_ip(R=-1.0)))
        assert any("d" in v for v in validate_spec(spec_ip(d=0)))

    def test_compact_needs_R_prime(self):
        bad = spec_ip(potential_kind=COMPACT_SUPPORT)
        assert any("R_prime" in v for v in validate_spec(bad))
        bad = spec_ip(potential_kind=COMPACT_SUPPORT, R_prime=0.5)
        assert any("R_prime must exceed R" in v for v in validate_spec(bad))

    def test_never_raises(self):
        validate_spec(spec_ip(m=-3.0, rho=-1.0, eta=-2.0))


class TestCoefficients:
    def test_outer_drift_values(self):
        c = build_coefficients(spec_ip(delta=0.0))
        assert c.drift(2.0) == pytest.approx(1.0, rel=1e-15)
        assert c.potential(2.0) == pytest.approx(0.25, rel=1e-15)

    def test_outer_drift_with_a(self):
        c = build_coefficients(spec_ip(delta=1.0, rho=2.0, a=3.0))
        assert c.drift(4.0) == pytest.approx((2.0 + 3.0 / 4.0) * 4.0, rel=1e-15)

    def test_interior_positivity(self):
        # dense-sampling oracle for the interior extension
        c = build_coefficients(spec_ip(delta=0.0))
        r = np.linspace(0.0, 1.0, 10_000)
        assert np.min(c.potential(r)) > 0.0

    def test_potential_far_decay(self):
        c = build_coefficients(spec_ip())
        assert c.potential(1e6) == pytest.approx(1e-12, rel=1e-12)
        r = np.geomspace(1.0, 1e6, 200)
        assert np.all(c.potential(r) >= 0.0)

    def test_drift_zero_at_origin(self):
        for kw in (dict(), dict(delta=0.0, a=2.0), dict(delta=-0.5, a=1.0, d=2)):
            c = build_coefficients(spec_ip(**kw))
            assert c.drift(0.0) == 0.0

    def test_drift_bounded_inside(self):
        for kw in (dict(), dict(delta=0.0, a=2.0), dict(delta=2.0, rho=0.5), dict(delta=-0.5)):
            c = build_coefficients(spec_ip(**kw))
            r = np.linspace(0.0, 1.0, 4096)
            bound = 2.0 * max(abs(c.drift(1.0)), 1.0)
            assert np.max(np.abs(c.drift(r))) <= bound

    def test_seam_matching(self):
        for kw in (dict(), dict(delta=0.0, a=2.0), dict(eta=0.5), dict(delta=-0.5, R=2.0)):
            c = build_coefficients(spec_ip(**kw))
            assert max(c.seam_mismatch().values()) < 1e-10

    def test_seam_continuity_sampled(self):
        # one-sided limits: extension and closed form evaluated at R +/- 1e-8
        c = build_coefficients(spec_ip(delta=0.0, eta=2.0))
        eps = 1e-8
        for f, fp in ((c.potential, c.potential_d1), (c.drift, c.drift_d1)):
            jump = abs(f(c.R + eps) - f(c.R - eps))
            smooth_variation = 2 * eps * abs(fp(c.R)) * (1 + 1e-3) + 1e-12
            assert jump <= smooth_variation

    def test_closed_forms_outside(self):
        spec = spec_ip(delta=1.0, rho=2.0, a=-0.5, eta=3.0)
        c = build_coefficients(spec)
        r = np.geomspace(1.0, 1e4, 64)
        np.testing.assert_allclose(c.drift(r), (2.0 - 0.5 / r) * r, rtol=1e-15)
        np.testing.assert_allclose(c.potential(r), r**-3.0, rtol=1e-15)

    def test_derivatives_against_fd(self):
        c = build_coefficients(spec_ip(delta=0.7, a=1.5, eta=1.3))
        h = 1e-6
        for r in (0.3, 0.8, 1.0 + h, 2.5, 7.0):
            fd1 = (c.drift(r + h) - c.drift(r - h)) / (2 * h)
            assert c.drift_d1(r) == pytest.approx(fd1, rel=2e-8, abs=1e-8)
            fd2 = (c.drift_d1(r + h) - c.drift_d1(r - h)) / (2 * h)
            assert c.drift_d2(r) == pytest.approx(fd2, rel=2e-7, abs=1e-7)
            fdp = (c.potential(r + h) - c.potential(r - h)) / (2 * h)
            assert c.potential_d1(r) == pytest.approx(fdp, rel=2e-8, abs=1e-10)

    @pytest.mark.parametrize("delta", [1.0, 0.0, -1.0, -0.5])
    def test_drift_integral_vs_quadrature(self, delta):
        c = build_coefficients(spec_ip(delta=delta, a=0.7))
        for r in (0.4, 1.0, 3.0, 20.0):
            ref, _ = quad(lambda s: float(c.drift(s)), 0.0, r, epsabs=1e-13, epsrel=1e-13)
            assert float(c.drift_integral(r)) == pytest.approx(ref, rel=1e-10, abs=1e-11)

    def test_negative_radius_raises(self):
        c = build_coefficients(spec_ip())
        with pytest.raises(ValueError):
            c.drift(-0.1)
        with pytest.raises(ValueError):
            eval_potential(c, -1.0)

    def test_eval_wrappers(self):
        c = build_coefficients(spec_ip())
        assert eval_drift(c, 0.0) == 0.0
        assert eval_drift(c, 2.0, deriv=1) == pytest.approx(c.drift_d1(2.0))
        with pytest.raises(ValueError):
            eval_drift(c, 1.0, deriv=3)


class TestCompactSupport:
    def spec(self):
        return spec_ip(delta=0.0, a=2.0, potential_kind=COMPACT_SUPPORT, R_prime=2.0)

    def test_zero_beyond_support(self):
        c = build_coefficients(self.spec())
        assert eval_potential(c, 3.0) == 0.0
        assert eval_potential(c, 2.0) == 0.0
        assert c.potential_d1(3.0) == 0.0

    def test_positive_inside_support(self):
        c = build_coefficients(self.spec())
        r = np.linspace(0.0, 1.999, 5000)
        assert np.min(c.potential(r[:-1])) > 0.0

    def test_monotone_cutoff_region(self):
        c = build_coefficients(self.spec())
        r = np.linspace(1.0, 2.0, 1000)
        v = c.potential(r)
        assert np.all(np.diff(v) <= 1e-15)

    def test_c1_at_cutoff(self):
        c = build_coefficients(self.spec())
        m = c.seam_mismatch()
        assert m["potential_Rp"] < 1e-10
        assert m["potential_d1_Rp"] < 1e-10


class TestConfig:
    def test_parse_types_and_comments(self):
        text = """
        # comment
        m = 2          # trailing
        d = 3
        delta = 0.0
        rho = 1.0
        a = 0
        eta = 2.0
        R = 1.0
        potential_kind = "inverse_power"
        """
        data = parse_config_text(text)
        assert data["m"] == 2 and isinstance(data["d"], int)
        assert data["potential_kind"] == "inverse_power"

    def test_load_spec_round_trip(self, tmp_path):
        p = tmp_path / "case.cfg"
        p.write_text(
            "m = 2.0\nd = 3\ndelta = 1.0\nrho = 1.0\na = 0.0\neta = 2.0\nR = 1.0\n"
        )
        spec = load_spec(p)
        assert spec == spec_ip()
        assert ProblemSpec.from_dict(spec.to_dict()) == spec

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "case.cfg"
        p.write_text("m = 2\nd = 3\ndelta = 1\nrho = 1\neta = 2\nR = 1\nbogus = 7\n")
        with pytest.raises(ValueError, match="bogus"):
            load_spec(p)

    def test_missing_key(self, tmp_path):
        p = tmp_path / "case.cfg"
        p.write_text("m = 2\nd = 3\n")
        with pytest.raises(ValueError, match="missing"):
            load_spec(p)

    def test_invalid_spec_rejected(self, tmp_path):
        p = tmp_path / "case.cfg"
        p.write_text("m = 0.5\nd = 3\ndelta = 1\nrho = 1\neta = 2\nR = 1\n")
        with pytest.raises(ValueError, match="m must exceed 1"):
            load_spec(p)

    def test_digest_stable(self):
        assert spec_digest(spec_ip()) == spec_digest(spec_ip())
        assert spec_digest(spec_ip()) != spec_digest(spec_ip(a=1.0))
