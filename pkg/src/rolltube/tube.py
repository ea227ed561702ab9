"""Error-tube synthesis for zero-order-held feedback over multi-step holds.

When a control update is transmitted, the actuator receives the nominal input
plus a correction K(x_p - xbar_p) and then holds it for up to H steps.  The
real-minus-nominal error must stay inside an invariant cross section omega_p
for every hold length from 1 to H and every disturbance realization.  The
relevant maps are the lifted pairs A_i = A^i and B_i = sum_{j<i} A^j B, since
a held input acts through B_i over an i-step window.

Synthesis here scales a fixed template polytope by the smallest factor that
makes the invariance condition hold; the factor has a closed form per facet
and lifted step because support functions are linear under scaling.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .geometry import Polytope, affine_image, minkowski_sum, pontryagin_diff, \
    subset, support


class TubeSynthesisError(RuntimeError):
    """Template/gain pair cannot contain the held-feedback error."""


class TighteningError(RuntimeError):
    """Tube cross section consumes the state or input constraints."""


@dataclass(frozen=True)
class LiftedMatrices:
    """Powers A_i = A^i and held-input maps B_i = sum_{j=0}^{i-1} A^j B."""

    A_list: tuple
    B_list: tuple

    def __getitem__(self, i):
        return self.A_list[i], self.B_list[i]


@dataclass(frozen=True)
class TubeParams:
    """Error-feedback gain, invariant cross section, its input image, hold length."""

    K: np.ndarray
    omega_p: Polytope
    k_omega_p: Polytope
    H: int

    def __post_init__(self):
        if not self.omega_p.contains_origin():
            raise ValueError("tube cross section must contain the origin")
        if self.H < 1:
            raise ValueError("hold length H must be >= 1")

    def to_json_dict(self):
        return {
            "K": np.asarray(self.K).tolist(),
            "omega_p": self.omega_p.to_json_dict(),
            "k_omega_p": self.k_omega_p.to_json_dict(),
            "H": self.H,
        }

    @classmethod
    def from_json_dict(cls, data):
        return cls(
            K=np.atleast_2d(np.asarray(data["K"], dtype=float)),
            omega_p=Polytope.from_json_dict(data["omega_p"]),
            k_omega_p=Polytope.from_json_dict(data["k_omega_p"]),
            H=int(data["H"]),
        )


def lift(A, B, H: int) -> LiftedMatrices:
    """Lifted matrices for hold lengths 0..H via B_{i+1} = A B_i + B."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    if B.shape[0] != A.shape[0]:
        raise ValueError("B row count must match A")
    if H < 1:
        raise ValueError("H must be >= 1")
    a_list = [np.eye(A.shape[0])]
    b_list = [np.zeros_like(B)]
    for _ in range(H):
        a_list.append(A @ a_list[-1])
        b_list.append(A @ b_list[-1] + B)
    return LiftedMatrices(tuple(a_list), tuple(b_list))


def disturbance_sums(A, w_p: Polytope, H: int):
    """Accumulated disturbance sets D_i = W + A W + ... + A^{i-1} W, i in 1..H.

    Returned list is indexed so that result[i-1] is D_i.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sums = [w_p]
    power = np.eye(A.shape[0])
    for _ in range(1, H):
        power = A @ power
        sums.append(minkowski_sum(sums[-1], affine_image(power, w_p)))
    return sums


def verify_rci(omega_p: Polytope, K, H: int, A, B, w_p: Polytope,
               tol: float = 1e-9) -> bool:
    """Check (A_i + B_i K) omega_p + D_i is contained in omega_p for i in 1..H."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    lifted = lift(A, B, H)
    d_sets = disturbance_sums(A, w_p, H)
    for i in range(1, H + 1):
        a_i, b_i = lifted[i]
        mapped = affine_image(a_i + b_i @ K, omega_p)
        if not subset(minkowski_sum(mapped, d_sets[i - 1]), omega_p, tol):
            return False
    return True


def synth_rci_scaled_template(template: Polytope, K, H: int, A, B,
                              w_p: Polytope) -> Polytope:
    """Smallest uniform scaling of the template that is hold-invariant.

    For each template facet (e, h) and hold length i, invariance of
    rho*template needs  rho * sigma_T((A_i + B_i K)' e) + sigma_{D_i}(e)
    <= rho * h,  which pins the minimal rho per pair in closed form; the
    overall minimum is their maximum.  Raises TubeSynthesisError when some
    facet direction is not contracted (coefficient >= 1), meaning this
    template/gain pair can never contain the error.
    """
    if not template.contains_origin():
        raise ValueError("template must contain the origin")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    lifted = lift(A, B, H)
    d_sets = disturbance_sums(A, w_p, H)
    rho = 0.0
    for i in range(1, H + 1):
        a_i, b_i = lifted[i]
        closed = a_i + b_i @ K
        for normal, offset in zip(template.normals, template.offsets):
            mapped_support = support(template, closed.T @ normal)
            if mapped_support >= offset:
                raise TubeSynthesisError(
                    f"template not contracted at hold length {i}: coefficient "
                    f"{mapped_support / offset:.4f} >= 1; try a different gain or template"
                )
            rho = max(rho, support(d_sets[i - 1], normal) / (offset - mapped_support))
    if rho == 0.0:
        return Polytope.point(np.zeros(template.dim))
    return Polytope(template.normals, rho * template.offsets)


def error_feedback(v_c, x_p, xbar_p, K):
    """Transmitted input: nominal plus gain times the plant-state error."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    v_c = np.asarray(v_c, dtype=float).ravel()
    return v_c + K @ (np.asarray(x_p, dtype=float).ravel()
                      - np.asarray(xbar_p, dtype=float).ravel())


def tighten(x_p_set: Polytope, u_p_set: Polytope, tube: TubeParams):
    """Shrink state/input constraints by the tube cross sections.

    Both results must keep the origin strictly in their interior; a result
    that is empty or collapses onto the origin means the tube consumed the
    constraints and synthesis should be revisited.
    """
    xbar_set = pontryagin_diff(x_p_set, tube.omega_p)
    ubar_set = pontryagin_diff(u_p_set, tube.k_omega_p)
    for name, result in (("state", xbar_set), ("input", ubar_set)):
        if result.is_empty or np.min(result.offsets) < 1e-9:
            raise TighteningError(
                f"tightened {name} constraint lost the origin: tube cross "
                f"section too large (consider smaller H or different gain)"
            )
    return xbar_set, ubar_set


def error_containment_trial(tube: TubeParams, A, B, w_sampler, v_c, e0,
                            H: int, tol: float = 1e-9) -> bool:
    """Simulate one held-feedback episode and check the error stays in the tube.

    Runs the real and nominal plants side by side: at step 0 the correction
    K e0 is transmitted and held, afterwards both systems coast on their held
    inputs while the disturbance w_sampler(i) hits the real plant.  Returns
    True iff the plant error stays in omega_p and the held-input error stays
    in k_omega_p for all of steps 1..H.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    K = np.atleast_2d(np.asarray(tube.K, dtype=float))
    v_c = np.asarray(v_c, dtype=float).ravel()
    e0 = np.asarray(e0, dtype=float).ravel()

    xbar = np.zeros(A.shape[0])
    x = e0.copy()
    held_nominal = v_c
    held_real = v_c + K @ (x - xbar)
    for i in range(H):
        w = np.asarray(w_sampler(i), dtype=float).ravel()
        xbar = A @ xbar + B @ held_nominal
        x = A @ x + B @ held_real + w
        if not tube.omega_p.contains(x - xbar, tol):
            return False
        if not tube.k_omega_p.contains(held_real - held_nominal, tol):
            return False
    return True


def default_template(A, B, Q, R, n_facets: int = 16) -> Polytope:
    """Template polytope adapted to the closed-loop geometry.

    Uses the discrete-time Riccati solution P of (A, B, Q, R) as a metric:
    the template circumscribes the unit ball of x'Px with facets tangent at
    evenly spread directions.  In this metric each lifted closed-loop map is
    a contraction whenever the one-step loop
    is, which an axis-aligned box cannot guarantee.  One dimension reduces to
    an interval; above two dimensions, signed coordinate and diagonal
    directions are used.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    P = scipy.linalg.solve_discrete_are(A, B, Q, R)
    sqrt_p = scipy.linalg.sqrtm(P).real
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, n_facets, endpoint=False)
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        axes = np.vstack([np.eye(n), -np.eye(n)])
        diags = np.array(np.meshgrid(*[[-1.0, 1.0]] * n)).T.reshape(-1, n) / np.sqrt(n)
        dirs = np.vstack([axes, diags])
    return Polytope(dirs @ sqrt_p, np.ones(dirs.shape[0]))


def lqr_gain(A, B, Q, R):
    """Infinite-horizon LQ gain K with A + BK Schur stable."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    P = scipy.linalg.solve_discrete_are(A, B, Q, R)
    return -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def synth_tube(A, B, Q, R, w_p: Polytope, H: int, template: Polytope = None,
               K=None) -> TubeParams:
    """One-call tube synthesis: LQ gain, adapted template, minimal scaling.

    The result is re-verified against the invariance condition before being
    returned.
    """
    if K is None:
        K = lqr_gain(A, B, Q, R)
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if template is None:
        template = default_template(A, B, Q, R)
    omega_p = synth_rci_scaled_template(template, K, H, A, B, w_p)
    if not verify_rci(omega_p, K, H, A, B, w_p, tol=1e-8):
        raise TubeSynthesisError("synthesized cross section failed re-verification")
    return TubeParams(K=K, omega_p=omega_p, k_omega_p=affine_image(K, omega_p), H=H)
