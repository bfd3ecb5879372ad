"""Energies, momenta, stress sampling, norms, condition estimation."""

import numpy as np
import pytest
import scipy.sparse as sp

import rodlab as rl
from rodlab import diagnostics as diag
from rodlab.scenarios import _rigid_velocity, rollup_reference_circle
from rodlab.solve import SolveReport, StepRecord

from conftest import make_test_model, perturbed_state


class TestEnergies:
    def test_rest_state_all_zero(self):
        model = make_test_model("iga", loads=rl.LoadModel())
        q = rl.straight_state(model.disc)
        en = diag.energies(model, q, np.zeros_like(q))
        assert en.kinetic == 0.0 and en.barrier == 0.0
        assert en.strain == pytest.approx(0.0, abs=1e-20)
        assert en.total == pytest.approx(0.0, abs=1e-20)

    def test_rigid_translation_kinetic_energy(self):
        props = rl.RodProperties(1e3, 1e2, 2.0, 0.0, 8.0)
        model = rl.build_model(rl.Formulation("nodal_r3"), props, 6, rl.LoadModel())
        q = rl.straight_state(model.disc)
        u = 0.7
        v = np.zeros_like(q).reshape(-1, 3)
        v[0::2, 0] = u  # value dofs translate; director dofs unchanged
        en = diag.energies(model, q, v.ravel())
        assert en.kinetic == pytest.approx(0.5 * props.mass_per_length
                                           * props.length * u**2)

    def test_forces_are_negative_energy_gradients(self, rng):
        from rodlab.assembly import assemble_external, assemble_internal
        model = make_test_model(
            "nodal_r3",
            loads=rl.LoadModel(gravity=(0.0, 0.0, -2.0),
                               barrier=rl.BarrierModel(height=-5.0, strength=1.0)))
        q = perturbed_state(model, rng)
        f_int, _ = assemble_internal(model, q, need_tangent=False)
        f_ext, _ = assemble_external(model, q, 1.0, need_tangent=False)
        h = 1e-6
        grad_total = np.zeros_like(q)
        for i in range(len(q)):
            qp, qm = q.copy(), q.copy()
            qp[i] += h
            qm[i] -= h
            ep = diag.energies(model, qp)
            em = diag.energies(model, qm)
            grad_total[i] = (ep.total - em.total) / (2 * h)
        residual = f_ext - f_int
        assert np.linalg.norm(residual + grad_total) < 1e-6 * np.linalg.norm(residual)


class TestMomenta:
    def test_zero_at_rest(self):
        model = make_test_model("iga", loads=rl.LoadModel())
        q = rl.straight_state(model.disc)
        lin, ang = diag.momenta(model, q, np.zeros_like(q))
        assert np.allclose(lin, 0.0) and np.allclose(ang, 0.0)

    def test_rigid_translation_linear_momentum(self):
        props = rl.RodProperties(1e3, 1e2, 2.0, 0.0, 8.0)
        model = rl.build_model(rl.Formulation("iga"), props, 6, rl.LoadModel())
        q = rl.straight_state(model.disc)
        v = _rigid_velocity(model, [0.3, 0.0, 0.0], [0.0, 0.0, 0.0])
        lin, _ = diag.momenta(model, q, v)
        assert np.allclose(lin, [0.3 * 2.0 * 8.0, 0.0, 0.0])

    def test_conserved_over_free_flight(self):
        props = rl.RodProperties(1e4, 10.0, 2.0, 0.0, 5.0)
        model = rl.build_model(rl.Formulation("iga"), props, 6, rl.LoadModel())
        q0 = rl.straight_state(model.disc)
        v0 = _rigid_velocity(model, [0.2, -0.1, 0.05], [0.0, 0.3, 0.5])
        lin0, ang0 = diag.momenta(model, q0, v0)
        state, _, _ = rl.dynamic_march(model, 0.01, 100,
                                       initial=rl.RodState(q0.copy(), v0))
        lin1, ang1 = diag.momenta(model, state.q, state.v)
        assert np.linalg.norm(lin1 - lin0) / np.linalg.norm(lin0) < 1e-8
        assert np.linalg.norm(ang1 - ang0) / np.linalg.norm(ang0) < 1e-8


class TestStressSampling:
    def test_unstressed_rod_zero(self):
        model = make_test_model("iga", loads=rl.LoadModel())
        q = rl.straight_state(model.disc)
        res = diag.stress_resultants(model, q, np.linspace(0, 8.0, 9))
        assert np.allclose(res["axial"], 0.0, atol=1e-10)
        assert np.allclose(res["bending_norm"], 0.0, atol=1e-9)

    def test_signed_axial_tension_and_compression(self):
        model = make_test_model("iga", loads=rl.LoadModel(), fix_left="none")
        q = rl.straight_state(model.disc).reshape(-1, 3)
        q[:, 0] *= 1.01   # uniform stretch
        res = diag.stress_resultants(model, q.ravel(), np.array([4.0]))
        assert res["axial"][0] == pytest.approx(0.01 * 1e3, rel=1e-10)
        q[:, 0] *= 0.98 / 1.01
        res = diag.stress_resultants(model, q.ravel(), np.array([4.0]))
        assert res["axial"][0] < 0.0


class TestErrorNorms:
    def test_exact_reference_gives_zero(self):
        model = make_test_model("iga", loads=rl.LoadModel())
        q = rl.straight_state(model.disc)

        def reference(s):
            s = np.asarray(s)
            out = np.zeros((3, len(s), 3))
            out[0, :, 0] = s
            out[1, :, 0] = 1.0
            return out

        norms = diag.error_norms(model, q, reference)
        assert norms.l2 < 1e-13 and norms.h1 < 1e-13 and norms.h2 < 1e-12

    def test_norm_homogeneity(self, rng):
        model = make_test_model("iga", loads=rl.LoadModel())
        q0 = rl.straight_state(model.disc)

        def reference(s):
            s = np.asarray(s)
            out = np.zeros((3, len(s), 3))
            out[0, :, 0] = s
            out[1, :, 0] = 1.0
            return out

        dq = rng.standard_normal(model.n_dof)
        n1 = diag.error_norms(model, q0 + 1e-4 * dq, reference)
        n2 = diag.error_norms(model, q0 + 2e-4 * dq, reference)
        assert n2.l2 / n1.l2 == pytest.approx(2.0, rel=1e-6)
        assert n2.h1 / n1.h1 == pytest.approx(2.0, rel=1e-6)
        assert n2.h2 / n1.h2 == pytest.approx(2.0, rel=1e-6)

    def test_zero_reference_rejected(self):
        model = make_test_model("iga", loads=rl.LoadModel())
        q = rl.straight_state(model.disc)
        with pytest.raises(ValueError):
            diag.error_norms(model, q, lambda s: np.zeros((3, len(np.atleast_1d(s)), 3)))

    def test_rollup_reference_is_unit_speed_circle(self):
        ref = rollup_reference_circle(40.0)
        s = np.linspace(0.0, 40.0, 41)
        out = ref(s)
        assert np.allclose(np.linalg.norm(out[1], axis=1), 1.0)
        assert np.allclose(np.linalg.norm(out[2], axis=1), 2 * np.pi / 40.0)
        assert np.allclose(out[0][0], [0, 0, 0])
        assert np.allclose(out[0][-1], [0, 0, 0], atol=1e-12)  # closed circle


class TestConditionEstimate:
    def test_identity(self):
        est, method = diag.condition_estimate(sp.identity(5, format="csc"))
        assert est == pytest.approx(1.0)
        assert method == "svd"

    def test_known_diagonal(self):
        est, _ = diag.condition_estimate(sp.diags([1.0, 1e6]).tocsc())
        assert est == pytest.approx(1e6)

    def test_singular_reports_infinity(self):
        est, _ = diag.condition_estimate(sp.csc_matrix((4, 4)))
        assert est == np.inf

    def test_estimator_within_factor_of_svd(self, rng):
        a = rng.standard_normal((60, 60)) + 8 * np.eye(60)
        mat = sp.csc_matrix(a)
        exact, m1 = diag.condition_estimate(mat, dense_threshold=100)
        approx, m2 = diag.condition_estimate(mat, dense_threshold=10)
        assert m1 == "svd" and m2 == "power"
        assert approx / exact < 3.0 and exact / approx < 3.0


class TestRunStats:
    def test_single_step_mean(self):
        rep = SolveReport(steps=[StepRecord(1, 0.0, 1, 0.25, [1.0], True)])
        rows = diag.run_stats({("iga", 8): rep})
        assert rows[0]["mean_time_per_iter_s"] == pytest.approx(0.25)
        assert rows[0]["max_iterations"] == 1

    def test_table_keyed_by_formulation_and_mesh(self):
        rep = SolveReport(steps=[StepRecord(1, 0.0, 2, 0.5, [1.0, 0.1], True)])
        rows = diag.run_stats({("iga", 8): rep, ("nodal_spp", 16): rep})
        keys = {(r["formulation"], r["n_elements"]) for r in rows}
        assert keys == {("iga", 8), ("nodal_spp", 16)}
