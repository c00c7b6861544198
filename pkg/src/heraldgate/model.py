"""System parameters and construction of the driven dissipative model.

All rates and detunings are angular frequencies in a common unit (we work in
units of the qutrit decay rate ``gamma = gamma0 + gamma1`` throughout the
package; any consistent unit works since only ratios enter the physics).

Level scheme
------------
Quartit (resonator A):  g1, g2 ground; e1, e2 excited.
    Omega1 drives g1 <-> e1, Omega2 couples e1 <-> e2, and e2 <-> g2 couples
    to resonator A with strength g_A.  e1 decays to g1 (rate gamma_g1), e2 to
    g2 (rate gamma_g2).
Qutrits (resonator B):  0, 1 ground; 2 excited.
    1 <-> 2 couples to resonator B with strength g_B; 2 decays to 0 and 1
    (rates gamma0, gamma1).
Modes: the +/- combinations of the two resonator fields, split by 2J, each
    decaying at kappa.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .qspace import (G1, G2, E1, E2, QUARTIT_DIM, QUTRIT_DIM, HilbertSpace,
                     destroy, lift, product_state, transition)

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class SystemParams:
    """Physical parameters of the two-resonator network.

    Attributes
    ----------
    gamma0, gamma1 : float
        Qutrit decay rates 2 -> 0 and 2 -> 1.  Their sum is the total qutrit
        linewidth ``gamma`` used as the reference unit.
    gamma_g1, gamma_g2 : float
        Quartit decay rates e1 -> g1 and e2 -> g2.
    kappa : float
        Linewidth of each resonator mode.
    g_A, g_B : float
        Emitter-resonator couplings in resonators A and B.
    J : float
        Inter-resonator photon hopping; the +/- modes are split by 2J.
    delta : float
        Detuning of the qutrit 1 <-> 2 transition from the lower (-) mode.
    Delta_e1, Delta_e2 : float
        Quartit excited-level detunings in the frame of the drives.
    Omega1, Omega2 : float
        Rabi frequencies of the weak g1 <-> e1 probe and the e1 <-> e2 field.
    n_qutrits : int
        Number of qutrits in resonator B.
    n_max : int
        Fock cutoff per field mode.
    """

    gamma0: float
    gamma1: float
    gamma_g1: float
    gamma_g2: float
    kappa: float
    g_A: float
    g_B: float
    J: float
    delta: float
    Delta_e1: float
    Delta_e2: float
    Omega1: float
    Omega2: float
    n_qutrits: int = 1
    n_max: int = 2

    # ---- derived dimensionless groups ----

    @property
    def gamma(self) -> float:
        return self.gamma0 + self.gamma1

    @property
    def C_A(self) -> float:
        return self.g_A**2 / (self.kappa * self.gamma)

    @property
    def C_B(self) -> float:
        return self.g_B**2 / (self.kappa * self.gamma)

    @property
    def alpha(self) -> float:
        return (self.g_A / self.g_B) ** 2

    @property
    def beta(self) -> float:
        return self.gamma_g2 / self.gamma

    @property
    def hopping_ratio(self) -> float:
        """J / kappa, the mode splitting in units of the mode linewidth."""
        return self.J / self.kappa

    @property
    def lam(self) -> float:
        """Interference parameter (J / kappa) / sqrt(C_B)."""
        return self.hopping_ratio / np.sqrt(self.C_B)

    @property
    def Omega_eff(self) -> float:
        """Two-photon Rabi frequency Omega1 * Omega2 / (2 * Delta_e1)."""
        return self.Omega1 * self.Omega2 / (2.0 * self.Delta_e1)

    def space(self) -> HilbertSpace:
        return HilbertSpace(self.n_qutrits, self.n_max)

    def validate(self) -> None:
        """Raise ValueError on unphysical values; warn outside the working regime.

        The closed rate formulas assume a dispersive probe (Omega1, Omega2
        well below Delta_e1) and well-split field modes (kappa well below J).
        Leaving that regime is allowed, so violations only emit a UserWarning.
        """
        positive = ("kappa", "g_A", "g_B", "gamma_g1", "gamma_g2")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("gamma0", "gamma1", "J", "Omega1", "Omega2")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.gamma <= 0:
            raise ValueError("gamma0 + gamma1 must be positive")
        if self.Delta_e1 == 0 and self.Omega1 != 0:
            raise ValueError("Delta_e1 = 0 with a nonzero probe has no "
                             "dispersive regime; set Delta_e1 != 0")
        if self.n_qutrits < 1:
            raise ValueError(f"n_qutrits must be >= 1, got {self.n_qutrits}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if self.Delta_e1 != 0:
            for name in ("Omega1", "Omega2"):
                ratio = getattr(self, name) / abs(self.Delta_e1)
                if ratio >= 0.2:
                    warnings.warn(
                        f"{name} / |Delta_e1| = {ratio:.2f} is outside the "
                        "dispersive regime; perturbative rates degrade",
                        UserWarning, stacklevel=2)
        if self.J == 0 or self.kappa / self.J >= 0.2:
            warnings.warn(
                "kappa / J = "
                + (f"{self.kappa / self.J:.2f}" if self.J else "inf")
                + " leaves the modes poorly resolved; interference between "
                "them weakens", UserWarning, stacklevel=2)


def params_from_groups(C_B: float, lam: float, *, C_A: float | None = None,
                       kappa: float, Delta_e1: float, Omega1: float,
                       Omega2: float, delta: float = 0.0, Delta_e2: float = 0.0,
                       gamma0: float = 0.5, gamma1: float = 0.5,
                       gamma_g1: float = 1.0, gamma_g2: float = 1.0,
                       n_qutrits: int = 1, n_max: int = 2) -> SystemParams:
    """Build parameters from the dimensionless groups (gamma units).

    ``g_A``, ``g_B`` and ``J`` are derived from the cooperativities and the
    interference parameter ``lam = (J/kappa)/sqrt(C_B)``.  ``C_A`` defaults
    to ``C_B``.  All rates are in units of gamma = gamma0 + gamma1.
    """
    gamma = gamma0 + gamma1
    if C_A is None:
        C_A = C_B
    g_B = np.sqrt(C_B * kappa * gamma)
    g_A = np.sqrt(C_A * kappa * gamma)
    J = lam * np.sqrt(C_B) * kappa
    return SystemParams(gamma0=gamma0, gamma1=gamma1, gamma_g1=gamma_g1,
                        gamma_g2=gamma_g2, kappa=kappa, g_A=g_A, g_B=g_B, J=J,
                        delta=delta, Delta_e1=Delta_e1, Delta_e2=Delta_e2,
                        Omega1=Omega1, Omega2=Omega2, n_qutrits=n_qutrits,
                        n_max=n_max)


def with_probe_rules(params: SystemParams) -> SystemParams:
    """Apply the standard weak-probe scaling used for full-model checks.

    Sets Omega1 = Delta_e1 / (10 C_B^{1/4}) and Omega2 = 4 gamma C_B^{1/4},
    which keeps the two-photon Rabi frequency at 0.2 gamma for any C_B.
    """
    cq = params.C_B ** 0.25
    return replace(params, Omega1=params.Delta_e1 / (10.0 * cq),
                   Omega2=4.0 * params.gamma * cq)


# ---------------------------------------------------------------------------
# operator construction
# ---------------------------------------------------------------------------

def build_hamiltonian(params: SystemParams,
                      space: HilbertSpace | None = None) -> sp.csr_matrix:
    """Full Hamiltonian in the rotating frame of the drives.

    Includes the quartit ladder g1 -(Omega1)- e1 -(Omega2)- e2 -(g_A)- g2
    with one photon exchanged, the qutrit 1 <-> 2 transitions coupled to the
    field with strength g_B, and the mode splitting 2J carried by the + mode.
    The - mode is the zero of energy; the + (-) mode enters the A-resonator
    coupling symmetrically and the B-resonator coupling antisymmetrically.
    """
    if space is None:
        space = params.space()
    sq = {"e1e1": transition(QUARTIT_DIM, E1, E1),
          "e2e2": transition(QUARTIT_DIM, E2, E2),
          "e2g2": transition(QUARTIT_DIM, E2, G2),
          "e2e1": transition(QUARTIT_DIM, E2, E1),
          "e1g1": transition(QUARTIT_DIM, E1, G1)}
    a = destroy(space.n_max + 1)
    ap = lift(space, {space.mode_plus_site: a})
    am = lift(space, {space.mode_minus_site: a})

    H = (params.Delta_e1 * lift(space, {0: sq["e1e1"]})
         + params.Delta_e2 * lift(space, {0: sq["e2e2"]})
         + 2.0 * params.J * (ap.conj().T @ ap))
    # quartit-field: (g_A/sqrt2)(a_+ + a_-)|e2><g2| + h.c.
    coupA = (params.g_A / SQRT2) * ((ap + am) @ lift(space, {0: sq["e2g2"]}))
    H = H + coupA + coupA.conj().T
    # drives on the quartit
    H = H + (params.Omega2 / 2.0) * lift(space, {0: sq["e2e1"] + sq["e2e1"].T})
    H = H + (params.Omega1 / 2.0) * lift(space, {0: sq["e1g1"] + sq["e1g1"].T})
    # qutrits: detuning of |2> and (g_B/sqrt2)(a_+ - a_-)|2><1| + h.c.
    s22 = transition(QUTRIT_DIM, 2, 2)
    s21 = transition(QUTRIT_DIM, 2, 1)
    for site in space.qutrit_sites:
        H = H + params.delta * lift(space, {site: s22})
        coupB = (params.g_B / SQRT2) * ((ap - am) @ lift(space, {site: s21}))
        H = H + coupB + coupB.conj().T
    return H.tocsr()


def build_collapse_ops(params: SystemParams,
                       space: HilbertSpace | None = None) -> list[sp.csr_matrix]:
    """Jump operators: photon loss from both modes, quartit and qutrit decay.

    Returns 4 + 2 * n_qutrits operators, ordered as
    [mode +, mode -, e1 -> g1, e2 -> g2, then (2 -> 0, 2 -> 1) per qutrit].
    """
    if space is None:
        space = params.space()
    a = destroy(space.n_max + 1)
    ops = [np.sqrt(params.kappa) * lift(space, {space.mode_plus_site: a}),
           np.sqrt(params.kappa) * lift(space, {space.mode_minus_site: a}),
           np.sqrt(params.gamma_g1) * lift(space, {0: transition(QUARTIT_DIM, G1, E1)}),
           np.sqrt(params.gamma_g2) * lift(space, {0: transition(QUARTIT_DIM, G2, E2)})]
    for site in space.qutrit_sites:
        if params.gamma0 > 0:
            ops.append(np.sqrt(params.gamma0) * lift(space, {site: transition(QUTRIT_DIM, 0, 2)}))
        if params.gamma1 > 0:
            ops.append(np.sqrt(params.gamma1) * lift(space, {site: transition(QUTRIT_DIM, 1, 2)}))
    return ops


def herald_projector(space: HilbertSpace) -> sp.csr_matrix:
    """Projector onto the heralded subspace.

    Quartit in g1 and every qutrit within its ground doublet {0, 1}; the
    field modes are unconstrained.  A no-jump record leaves the state inside
    this subspace up to the small admixtures removed by the projection.
    """
    ops = {0: transition(QUARTIT_DIM, G1, G1)}
    qutrit_ground = transition(QUTRIT_DIM, 0, 0) + transition(QUTRIT_DIM, 1, 1)
    for site in space.qutrit_sites:
        ops[site] = qutrit_ground
    return lift(space, ops)


def observables(space: HilbertSpace) -> dict[str, sp.csr_matrix]:
    """Operators tracked along trajectories (quartit populations, mode photon numbers)."""
    a = destroy(space.n_max + 1)
    n_op = (a.conj().T @ a).tocsr()
    return {
        "pop_g1": lift(space, {0: transition(QUARTIT_DIM, G1, G1)}),
        "pop_g2": lift(space, {0: transition(QUARTIT_DIM, G2, G2)}),
        "n_plus": lift(space, {space.mode_plus_site: n_op}),
        "n_minus": lift(space, {space.mode_minus_site: n_op}),
    }


def top_fock_projector(space: HilbertSpace) -> sp.csr_matrix:
    """Projector onto states with either mode at the Fock cutoff.

    Its population bounds the truncation error of the field expansion; runs
    keep it well below 1e-4.
    """
    top = transition(space.n_max + 1, space.n_max, space.n_max)
    p_plus = lift(space, {space.mode_plus_site: top})
    p_minus = lift(space, {space.mode_minus_site: top})
    both = lift(space, {space.mode_plus_site: top, space.mode_minus_site: top})
    return (p_plus + p_minus - both).tocsr()


def excitation_projector(space: HilbertSpace, n: int) -> sp.csr_matrix:
    """Projector onto register states with exactly n qutrits in |1>.

    The remaining qutrits must sit in |0> (none in |2>); quartit and field
    modes are untouched.  Over n = 0 .. N these projectors are mutually
    orthogonal and resolve the identity on the qubit manifold, where the
    branch rates are block diagonal by this excitation number.
    """
    N = space.n_qutrits
    if not 0 <= n <= N:
        raise ValueError(f"excitation number must lie in 0..{N}, got {n}")
    p0 = transition(QUTRIT_DIM, 0, 0)
    p1 = transition(QUTRIT_DIM, 1, 1)
    proj = sp.csr_matrix((space.dim, space.dim), dtype=complex)
    for excited in combinations(space.qutrit_sites, n):
        ops = {site: (p1 if site in excited else p0)
               for site in space.qutrit_sites}
        proj = proj + lift(space, ops)
    return proj.tocsr()


def initial_state(params: SystemParams, space: HilbertSpace | None = None,
                  amplitudes=None) -> np.ndarray:
    """Pure initial density matrix for a gate run.

    Quartit in g1, fields in vacuum, qutrit k in
    ``amplitudes[k][0] |0> + amplitudes[k][1] |1>`` (uniform superposition
    when ``amplitudes`` is None).  Each amplitude pair must be normalized to
    within 1e-9.
    """
    if space is None:
        space = params.space()
    quartit = np.zeros(QUARTIT_DIM, dtype=complex)
    quartit[G1] = 1.0
    if amplitudes is None:
        amplitudes = [(1.0 / SQRT2, 1.0 / SQRT2)] * space.n_qutrits
    if len(amplitudes) != space.n_qutrits:
        raise ValueError(f"need one amplitude pair per qutrit "
                         f"({space.n_qutrits}), got {len(amplitudes)}")
    qutrits = []
    for k, amp in enumerate(amplitudes):
        a = np.asarray(amp, dtype=complex)
        if a.shape != (2,):
            raise ValueError(f"amplitude pair {k} has shape {a.shape}, want (2,)")
        norm = float(np.abs(a) @ np.abs(a))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"amplitude pair {k} has norm^2 = {norm!r}, "
                             "normalize to within 1e-9")
        qutrits.append(np.array([a[0], a[1], 0.0], dtype=complex))
    psi = product_state(space, quartit, qutrits)
    return np.outer(psi, psi.conj())


def uniform_superposition_state(params: SystemParams,
                                space: HilbertSpace | None = None) -> np.ndarray:
    """Gate input state: quartit in g1, each qutrit in (|0> + |1>)/sqrt2, fields in vacuum."""
    if space is None:
        space = params.space()
    quartit = np.zeros(QUARTIT_DIM, dtype=complex)
    quartit[G1] = 1.0
    plus = np.zeros(QUTRIT_DIM, dtype=complex)
    plus[0] = plus[1] = 1.0 / SQRT2
    return product_state(space, quartit, [plus] * space.n_qutrits)
