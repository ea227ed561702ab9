"""Independent brute-force solver for the scheduling OCP.

Enumerates every bit-string of the horizon, filters with a counter-based
admissibility check and a bucket simulation written from scratch, and solves
each surviving schedule as a sparse equality-constrained QP over the full
state/input trajectories (no forward-substitution elimination).  Used as the
optimality oracle for the production solver.
"""

import numpy as np

from rolltube.qpsolve import QuadraticProgram, solve as solve_qp


def admissible(bits, H, s):
    counter = s
    if counter > H - 1:
        return False
    for bit in bits:
        counter = 0 if bit else counter + 1
        if counter > H - 1:
            return False
    return True


def bucket_levels(beta0, bits, g, c, b):
    levels = [beta0]
    for bit in bits:
        levels.append(min(levels[-1] + g - bit * c, b))
    return levels


def sparse_schedule_qp(x, xbar, bits, model, tube, ti, xbar_set, ubar_set):
    """Transcription QP: variables are all nominal states and held inputs."""
    n, m = model.n_states, model.n_inputs
    N = len(bits)
    tx = [i for i, bit in enumerate(bits) if bit]
    # layout: x_p(0..N) | u_s(0..N) | u_c over transmissions
    nz = n * (N + 1) + m * (N + 1) + m * len(tx)

    def xs(i):
        return slice(n * i, n * (i + 1))

    def us(i):
        return slice(n * (N + 1) + m * i, n * (N + 1) + m * (i + 1))

    def uc(i):
        pos = tx.index(i)
        base = n * (N + 1) + m * (N + 1)
        return slice(base + m * pos, base + m * (pos + 1))

    eq_rows, eq_rhs = [], []
    in_rows, in_rhs = [], []

    def eq(coeffs, rhs):
        row = np.zeros((len(rhs), nz))
        for sl, mat in coeffs:
            row[:, sl] += mat
        eq_rows.append(row)
        eq_rhs.append(np.asarray(rhs, dtype=float))

    def ineq(poly, sl, shift=None):
        row = np.zeros((poly.normals.shape[0], nz))
        row[:, sl] = poly.normals
        in_rows.append(row)
        rhs = poly.offsets.copy()
        if shift is not None:
            rhs = rhs - poly.normals @ shift
        in_rhs.append(rhs)

    if bits[0] == 1:
        # x(k) inside the tube around the optimized initial nominal state
        row = np.zeros((tube.omega_p.normals.shape[0], nz))
        row[:, xs(0)] = -tube.omega_p.normals
        in_rows.append(row)
        in_rhs.append(tube.omega_p.offsets - tube.omega_p.normals @ x.x_p)
        row = np.zeros((tube.k_omega_p.normals.shape[0], nz))
        row[:, us(0)] = -tube.k_omega_p.normals
        in_rows.append(row)
        in_rhs.append(tube.k_omega_p.offsets - tube.k_omega_p.normals @ x.u_s)
    else:
        eq([(xs(0), np.eye(n))], xbar.x_p)
        eq([(us(0), np.eye(m))], xbar.u_s)

    for i in range(N):
        if bits[i] == 1:
            eq([(xs(i + 1), np.eye(n)), (xs(i), -model.A), (uc(i), -model.B)],
               np.zeros(n))
            eq([(us(i + 1), np.eye(m)), (uc(i), -np.eye(m))], np.zeros(m))
            ineq(ubar_set, uc(i))
        else:
            eq([(xs(i + 1), np.eye(n)), (xs(i), -model.A), (us(i), -model.B)],
               np.zeros(n))
            eq([(us(i + 1), np.eye(m)), (us(i), -np.eye(m))], np.zeros(m))
        ineq(xbar_set, xs(i))
        ineq(ubar_set, us(i))
    ineq(ti.x_f_p, xs(N))
    ineq(ubar_set, us(N))

    hess = np.zeros((nz, nz))
    hess[us(0), us(0)] += 2.0 * model.S
    for i in range(N):
        hess[xs(i), xs(i)] += 2.0 * model.Q
        applied = uc(i) if bits[i] == 1 else us(i)
        hess[applied, applied] += 2.0 * model.R
    hess[xs(N), xs(N)] += 2.0 * ti.P_f

    return QuadraticProgram(
        hessian=hess, linear=np.zeros(nz),
        eq_lhs=np.vstack(eq_rows), eq_rhs=np.concatenate(eq_rhs),
        ineq_lhs=np.vstack(in_rows), ineq_rhs=np.concatenate(in_rhs))


def brute_force_ocp(x, xbar, s, k, model, tube, ti, N_max, H,
                    xbar_set, ubar_set, force_initial_tx=False):
    """Optimal value over all 2^N schedules, or None when infeasible."""
    N = N_max - (k % ti.M)
    best = None
    for code in range(2 ** N):
        bits = tuple((code >> (N - 1 - j)) & 1 for j in range(N))
        if force_initial_tx and bits[0] != 1:
            continue
        if not admissible(bits, H, s):
            continue
        beta0 = x.beta if bits[0] == 1 else xbar.beta
        levels = bucket_levels(beta0, bits, model.g, model.c, model.b)
        if min(levels) < 0:
            continue
        if not model.c - model.g <= levels[N] <= model.b:
            continue
        qp = sparse_schedule_qp(x, xbar, bits, model, tube, ti, xbar_set, ubar_set)
        sol = solve_qp(qp)
        if sol.status != "optimal":
            continue
        if best is None or sol.value < best[0]:
            best = (sol.value, bits)
    return best
