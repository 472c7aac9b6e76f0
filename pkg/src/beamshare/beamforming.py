"""
Beamforming engine: KPI-driven scheme selection and MRT / ZF precoders.

Precoding matrices are ``N_t x S`` (one column per scheduled stream) and are
used as ``x = sum_s sqrt(p) g[:, s] u_s`` with an equal per-stream power
``p``. Two power normalizations are available:

``"instantaneous"`` (default)
    ``g`` is scaled by one positive scalar so that ``||g||_F^2 = S`` and
    ``p = P_s / S``; the radiated power equals ``P_s`` in every slot.
``"average"``
    ``g`` is scaled by the constant that gives ``E||g||_F^2 = S`` over
    unit-variance i.i.d. Rayleigh channels, so the power constraint holds
    on average only. For ZF the power is split equally over all ``S + K``
    columns of the compound precoder (the ``K`` nulling columns carry no
    data), i.e. ``p = P_s / (S + K)``. This is the convention under which
    the large-system SINR expressions ``expected_sinr_mrt`` and
    ``expected_sinr_zf`` hold.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InsufficientDoF, InvalidCsi, InvalidParameter
from .numerics import pinv_right

DEFAULT_KPI_THRESHOLD = 0.5
NORMALIZATIONS = ("instantaneous", "average")


class Scheme(str, Enum):
    OMNI = "omni"
    MRT = "mrt"
    ZF = "zf"


@dataclass(frozen=True)
class PrecodingMatrix:
    g: np.ndarray
    scheme: Scheme
    power_scale: float
    stream_power: float

    @property
    def n_streams(self):
        return self.g.shape[-1]

    @property
    def transmit_power(self):
        """Total radiated power for unit-power, independent symbols."""
        return float(self.stream_power * np.sum(np.abs(self.g) ** 2))

    def antenna_powers(self):
        return self.stream_power * np.sum(np.abs(self.g) ** 2, axis=-1)


@dataclass(frozen=True)
class SchemeDecision:
    scheme: Scheme
    kpi_at_decision: float
    threshold: float


def select_scheme(kpi, threshold=DEFAULT_KPI_THRESHOLD):
    """MRT while the primary activity indicator is below ``threshold``,
    ZF otherwise (ties go to ZF, which protects the primary network)."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameter(f"KPI threshold {threshold} not in [0, 1]")
    value = kpi.value if hasattr(kpi, "value") else float(kpi)
    scheme = Scheme.MRT if value < threshold else Scheme.ZF
    return SchemeDecision(scheme, value, threshold)


def _stack(estimates, what):
    rows = [np.asarray(getattr(e, "vector", e), dtype=complex) for e in estimates]
    if not rows:
        raise InvalidCsi(f"no {what} channel estimates")
    n = {r.shape[-1] for r in rows}
    if len(n) != 1 or any(r.ndim != 1 for r in rows):
        raise InvalidCsi(f"{what} CSI vectors have inconsistent lengths")
    return np.stack(rows)


# -- array-level building blocks (batched over leading axes) ---------------

def mrt_directions(h):
    """Unnormalized MRT precoder ``H^H`` for ``h`` of shape (..., S, N)."""
    return np.conj(np.swapaxes(h, -1, -2))


def check_zf_dof(n_t, n_streams, n_nulled, strict=True):
    """Raise ``InsufficientDoF`` unless ``N_t > S + K`` (``>=`` if not strict)."""
    constrained = n_streams + n_nulled
    if n_t < constrained or (strict and n_t == constrained):
        op = ">" if strict else ">="
        raise InsufficientDoF(
            f"zero forcing needs N_t {op} S + K, got N_t={n_t}, "
            f"S={n_streams}, K={n_nulled}")


def zf_directions(h, g_null, strict_dof=True):
    """
    Data columns of the right pseudoinverse of the compound channel.

    ``h`` is (..., S, N) and ``g_null`` is (..., K, N). The compound matrix
    stacks the secondary rows above the primary rows; the first ``S``
    columns of its pseudoinverse give ``h_s w_s' = delta(s, s')`` and
    ``g_k w_s = 0`` for every nulled primary user ``k``.
    """
    S, N = h.shape[-2:]
    K = g_null.shape[-2]
    check_zf_dof(N, S, K, strict_dof)
    compound = np.concatenate([h, g_null], axis=-2) if K else h
    return pinv_right(compound)[..., :S]


def normalize_instantaneous(g, total_power):
    """Scale ``g`` so that ``||g||_F^2 = S``; returns (g, scale, stream power)."""
    S = g.shape[-1]
    fro2 = np.sum(np.abs(g) ** 2, axis=(-2, -1))
    if np.any(fro2 <= 0):
        raise InvalidCsi("all-zero channel estimate")
    scale = np.sqrt(S / fro2)
    return g * scale[..., None, None], scale, total_power / S


# -- precoders --------------------------------------------------------------

def omni_precoder(n_antennas, total_power=1.0):
    """Single-antenna baseline: antenna 0 radiates the full power."""
    g = np.zeros((n_antennas, 1), dtype=complex)
    g[0, 0] = 1.0
    return PrecodingMatrix(g, Scheme.OMNI, 1.0, float(total_power))


def mrt_precoder(h_est, total_power=1.0, normalization="instantaneous"):
    """Maximum ratio transmission toward the scheduled secondary users.

    The columns are the conjugated channel rows, so the effective channel
    ``H @ g`` is the Gram matrix ``H H^H`` times a positive scalar.
    """
    if normalization not in NORMALIZATIONS:
        raise InvalidParameter(f"unknown normalization {normalization!r}")
    h = _stack(h_est, "secondary")
    S, N = h.shape
    g = mrt_directions(h)
    if normalization == "instantaneous":
        g, scale, p = normalize_instantaneous(g, total_power)
    else:
        scale, p = 1.0 / np.sqrt(N), total_power / S
        g = g * scale
    return PrecodingMatrix(g, Scheme.MRT, float(scale), float(p))


def zf_precoder(h_est, g_est, total_power=1.0, normalization="instantaneous",
                strict_dof=True):
    """
    Zero-forcing precoder nulling every primary user in ``g_est``.

    Parameters
    ----------
    h_est : sequence of CsiEstimate or arrays
        Estimated channels of the scheduled secondary users.
    g_est : sequence of CsiEstimate or arrays
        Estimated channels of the primary users to protect. May be empty.
    total_power : float
        Secondary transmit power ``P_s``.
    normalization : {"instantaneous", "average"}
        See the module docstring.
    strict_dof : bool
        Require ``N_t > S + K`` (default). With ``False`` the square case
        ``N_t == S + K`` is accepted; the pseudoinverse still exists but
        has no spare degrees of freedom to absorb CSI error.

    Raises
    ------
    InsufficientDoF
        If the antenna count is too small for ``S + K`` constraints.
    SingularMatrix
        If the compound channel is rank deficient.
    """
    if normalization not in NORMALIZATIONS:
        raise InvalidParameter(f"unknown normalization {normalization!r}")
    h = _stack(h_est, "secondary")
    S, N = h.shape
    g_rows = _stack(g_est, "primary") if len(g_est) else np.zeros((0, N), complex)
    if g_rows.shape[1] != N:
        raise InvalidCsi("primary and secondary CSI lengths differ")
    K = g_rows.shape[0]
    w = zf_directions(h, g_rows, strict_dof)
    if normalization == "instantaneous":
        w, scale, p = normalize_instantaneous(w, total_power)
    else:
        # E[(H H^H)^-1]_ss = 1 / (N - S - K) for unit-variance entries
        check_zf_dof(N, S, K, strict=True)
        scale, p = np.sqrt(N - S - K), total_power / (S + K)
        w = w * scale
    return PrecodingMatrix(w, Scheme.ZF, float(scale), float(p))


# -- closed-form large-system SINRs -----------------------------------------

def expected_sinr_mrt(p_s, n_t, s_s):
    """``P_s N_t / (S_s (P_s + 1))`` at unit noise power."""
    if not (p_s > 0 and n_t > 0 and s_s > 0):
        raise InvalidParameter("MRT SINR arguments must be positive")
    return p_s * n_t / (s_s * (p_s + 1.0))


def expected_sinr_zf(p_s, n_t, s_s, k_r):
    """``P_s (N_t - (S_s + K_r)) / (S_s + K_r)`` at unit noise power."""
    check_zf_dof(n_t, s_s, k_r, strict=True)
    return p_s * (n_t - (s_s + k_r)) / (s_s + k_r)
