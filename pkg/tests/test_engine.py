import threading

import numpy as np
import pytest

from coordsplit.engine import (
    Params,
    SolverState,
    block_partition,
    controller_residual,
    draw_blocks,
    kernel_cyclic,
    kernel_gauss_seidel,
    kernel_random_block,
    run_async,
    run_serial,
    run_sync,
    solve,
)
from coordsplit.errors import ConfigurationError, ParameterError
from coordsplit.operators import Identity, ProxL1, SquareLossForward
from coordsplit.schemes import DouglasRachford, ForwardBackward

from instances import lasso_desk


def lasso_scheme(m=100, n=50, seed=0):
    A, b, lam = lasso_desk(seed, m, n)
    return ForwardBackward(SquareLossForward(A, b), ProxL1(lam))


# -- partition ---------------------------------------------------------------------


def test_block_partition_examples():
    sizes = [len(block_partition(10, 4, r)) for r in range(4)]
    assert sizes == [3, 3, 2, 2]
    assert list(block_partition(10, 4, 1)) == [3, 4, 5]
    assert block_partition(7, 1, 0) == range(0, 7)
    assert len(block_partition(3, 5, 3)) == 0 and len(block_partition(3, 5, 4)) == 0
    with pytest.raises(ValueError):
        block_partition(3, 2, 2)


@pytest.mark.parametrize("n,p", [(0, 3), (1, 1), (17, 4), (100, 7), (5, 9)])
def test_block_partition_covers(n, p):
    blocks = [block_partition(n, p, r) for r in range(p)]
    assert [i for b in blocks for i in b] == list(range(n))
    sizes = [len(b) for b in blocks]
    assert max(sizes) - min(sizes) <= 1


# -- params ------------------------------------------------------------------------


def test_params_validation():
    with pytest.raises(ParameterError):
        Params(n_threads=0)
    with pytest.raises(ParameterError):
        Params(eta_r=0.0)
    with pytest.raises(ParameterError):
        Params(eta_r=1.2)
    with pytest.raises(ParameterError):
        Params(tol=-1.0)
    with pytest.raises(ParameterError):
        Params(kernel="greedy")
    with pytest.raises(ParameterError):
        Params(mode="mpi")
    assert Params(mode="async", n_threads=4).relaxation() == 0.5
    assert Params(mode="async", n_threads=1).relaxation() == 1.0
    assert Params(mode="sync", n_threads=4).relaxation() == 1.0
    assert Params(eta_r=0.3).relaxation() == 0.3


# -- kernels -----------------------------------------------------------------------


def logged_run(scheme, params):
    return run_async(scheme, params, record_writes=True).write_log


def test_cyclic_single_agent_order():
    s = lasso_scheme(20, 3)
    log = logged_run(s, Params(max_epoch=4, n_threads=1))
    np.testing.assert_array_equal(log[:, 0], [0, 1, 2] * 4)


def test_cyclic_agents_stay_in_their_blocks():
    s = lasso_scheme(20, 4)
    log = logged_run(s, Params(max_epoch=50, n_threads=2))
    assert set(log[log[:, 1] == 0, 0]) == {0, 1}
    assert set(log[log[:, 1] == 1, 0]) == {2, 3}


def test_cyclic_empty_block_agent():
    s = lasso_scheme(20, 3)
    rep = run_async(s, Params(max_epoch=10, n_threads=5), record_writes=True)
    assert set(rep.write_log[:, 1]) <= {0, 1, 2}
    assert rep.updates == 30


def test_random_block_single_agent_is_cyclic():
    s = lasso_scheme(20, 5)
    log = logged_run(s, Params(max_epoch=3, n_threads=1, kernel="random_block"))
    np.testing.assert_array_equal(log[:, 0], list(range(5)) * 3)


def test_random_block_streams_reproducible_and_uniform():
    np.testing.assert_array_equal(draw_blocks(3, 1, 4, 50), draw_blocks(3, 1, 4, 50))
    assert not np.array_equal(draw_blocks(3, 0, 4, 50), draw_blocks(3, 1, 4, 50))
    # a rank's stream does not depend on how many agents exist besides the block count
    draws = draw_blocks(7, 0, 4, 10_000)
    freq = np.bincount(draws, minlength=4) / draws.size
    assert np.all(np.abs(freq - 0.25) <= 0.05 * 0.25)
    counts = np.bincount(draws, minlength=4)
    chi2 = np.sum((counts - 2500) ** 2 / 2500)
    assert chi2 < 16.27  # 0.999 quantile, 3 dof


def test_random_block_logged_blocks_follow_stream():
    s = lasso_scheme(20, 8)
    p = Params(max_epoch=6, n_threads=2, kernel="random_block", seed=11)
    log = logged_run(s, p)
    mine = log[log[:, 1] == 0, 0]
    blocks = draw_blocks(11, 0, 2, 48)
    expected = np.concatenate([list(block_partition(8, 2, int(b))) for b in blocks])
    np.testing.assert_array_equal(mine, expected[: mine.size])


def test_gauss_seidel_agents_touch_everything():
    s = lasso_scheme(20, 6)
    log = logged_run(s, Params(max_epoch=40, n_threads=2, kernel="gauss_seidel"))
    assert set(log[log[:, 1] == 0, 0]) == set(range(6))
    assert set(log[log[:, 1] == 1, 0]) == set(range(6))
    s1 = lasso_scheme(20, 6)
    one = logged_run(s1, Params(max_epoch=3, n_threads=1, kernel="gauss_seidel"))
    np.testing.assert_array_equal(one[:, 0], list(range(6)) * 3)


def test_gauss_seidel_matches_cyclic_objective():
    a = run_async(lasso_scheme(), Params(max_epoch=500, n_threads=2, kernel="gauss_seidel"))
    b = run_serial(lasso_scheme(), Params(max_epoch=500))
    assert abs(a.final_objective - b.final_objective) <= 1e-4 * abs(b.final_objective)


def test_kernel_functions_run_one_agent():
    for kern in (kernel_cyclic, kernel_random_block, kernel_gauss_seidel):
        s = lasso_scheme(20, 4)
        state = SolverState(s.x)
        done = kern(state, s, Params(max_epoch=5, n_threads=1), 0)
        assert done == 20 and state.stopped  # the claim past the budget raises the stop flag


def test_gauss_seidel_rejected_in_sync():
    with pytest.raises(ConfigurationError):
        run_sync(lasso_scheme(20, 4), Params(mode="sync", kernel="gauss_seidel"))


# -- drivers -----------------------------------------------------------------------


def test_async_single_agent_equals_serial_bitwise():
    a = run_async(lasso_scheme(), Params(max_epoch=50, n_threads=1))
    b = run_serial(lasso_scheme(), Params(max_epoch=50))
    np.testing.assert_array_equal(a.x, b.x)


def test_zero_epochs():
    s = lasso_scheme()
    x0 = s.x.copy()
    for run in (run_async, run_sync, run_serial):
        rep = run(s, Params(max_epoch=0, n_threads=2 if run is not run_serial else 1))
        np.testing.assert_array_equal(s.x, x0)
        assert rep.epochs_completed == 0


def test_async_four_agents_close_to_serial():
    ref = run_serial(lasso_scheme(), Params(max_epoch=500))
    rep = run_async(lasso_scheme(), Params(max_epoch=500, n_threads=4))
    assert abs(rep.final_objective - ref.final_objective) <= 1e-4 * abs(ref.final_objective)


def test_sync_single_agent_is_jacobi():
    s = lasso_scheme()
    ref = lasso_scheme()
    for _ in range(3):
        ref.set_point(ref.x - 0.8 * (ref.x - ref.full_map()))
    rep = run_sync(s, Params(max_epoch=3, mode="sync", eta_r=0.8))
    np.testing.assert_allclose(rep.x, ref.x, rtol=1e-12, atol=1e-12)
    one = run_sync(lasso_scheme(), Params(max_epoch=1, mode="sync"))
    np.testing.assert_allclose(one.x, lasso_scheme().full_map(), rtol=1e-12, atol=1e-13)


def test_sync_p_invariant_and_reproducible():
    xs = [run_sync(lasso_scheme(), Params(max_epoch=40, n_threads=p, mode="sync")).x for p in (1, 2, 3, 4)]
    for x in xs[1:]:
        np.testing.assert_array_equal(x, xs[0])
    again = run_sync(lasso_scheme(), Params(max_epoch=40, n_threads=3, mode="sync"))
    np.testing.assert_array_equal(again.x, xs[0])
    rnd = [run_sync(lasso_scheme(), Params(max_epoch=40, n_threads=p, mode="sync", kernel="random_block", seed=5)).x for p in (2, 4)]
    np.testing.assert_array_equal(rnd[0], xs[0])
    np.testing.assert_array_equal(rnd[1], xs[0])


def test_sync_epoch_accounting_and_trace():
    rep = run_sync(lasso_scheme(), Params(max_epoch=7, n_threads=2, mode="sync"))
    assert rep.updates == 7 * 50
    assert [r.epoch for r in rep.trace] == list(range(8))
    t = [r.seconds for r in rep.trace]
    assert all(b > a for a, b in zip(t, t[1:]))


def test_sync_residual_monotone():
    A, b, lam = lasso_desk()
    f = SquareLossForward(A, b)
    f.update_step_size(1.0 / np.linalg.norm(A, 2) ** 2)
    rep = run_sync(ForwardBackward(f, ProxL1(lam)), Params(max_epoch=200, n_threads=2, mode="sync"))
    res = [r.residual for r in rep.trace]
    assert np.all(np.diff(res) <= 1e-9)
    obj = [r.objective for r in rep.trace]
    assert np.all(np.diff(obj) <= 1e-12 * obj[0])


def test_async_trace_times_increase_and_tolerance_stops():
    rep = run_async(lasso_scheme(), Params(max_epoch=100000, n_threads=2, tol=1e-8))
    t = [r.seconds for r in rep.trace]
    assert all(b > a for a, b in zip(t, t[1:]))
    assert rep.updates < 100000 * 50
    assert rep.final_residual < 1e-6
    e = [r.epoch for r in rep.trace]
    assert all(b >= a for a, b in zip(e, e[1:]))


def test_sync_tolerance_stop():
    rep = run_sync(lasso_scheme(), Params(max_epoch=10000, n_threads=2, tol=1e-9, mode="sync"))
    assert rep.final_residual < 1e-9
    assert rep.epochs_completed < 10000


def test_controller_residual():
    s = ForwardBackward(SquareLossForward(np.eye(2), np.array([1.0, 0.0]), eta_f=1.0), Identity())
    state = SolverState(s.x)
    assert controller_residual(state, s) == pytest.approx(1.0)
    s.set_point(np.array([1.0, 0.0]))
    assert controller_residual(state, s, Params(tol=1e-6)) <= 1e-12
    assert state.stopped


def test_async_rejects_full_vector_scheme():
    s = DouglasRachford(Identity(), Identity(), 3)
    with pytest.raises(ConfigurationError):
        run_async(s, Params())
    rep = solve(s, Params(mode="sync", max_epoch=3))
    assert rep.final_residual == 0.0


def test_adapt_step_flag_runs():
    A, b, lam = lasso_desk()
    f = SquareLossForward(A, b, eta_f=3.0 / np.linalg.norm(A, 2) ** 2)  # too long: diverges without halving
    rep = run_sync(ForwardBackward(f, ProxL1(lam)), Params(max_epoch=300, mode="sync", adapt_step=True))
    assert np.isfinite(rep.final_objective)
    assert f.step < 3.0 / np.linalg.norm(A, 2) ** 2


def test_no_threads_left_behind():
    before = threading.active_count()
    run_sync(lasso_scheme(), Params(max_epoch=5, n_threads=4, mode="sync"))
    run_async(lasso_scheme(), Params(max_epoch=5, n_threads=4))
    assert threading.active_count() == before


def test_agent_errors_propagate():
    s = lasso_scheme(20, 4)

    def boom(*a, **k):
        raise RuntimeError("boom")

    s.compute_block = boom
    with pytest.raises(RuntimeError):
        run_sync(s, Params(max_epoch=5, n_threads=2, mode="sync"))
