"""Exact discrete probability arithmetic on named finite alphabets.

Joint distributions are dense tensors with one axis per named variable.
All information quantities are in bits (log base 2) and all objects are
immutable after construction, so they can be shared freely across workers.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-12
CLAMP_TOL = 1e-10


class ProbabilityError(ValueError):
    """Inputs violate a distribution contract (shape, normalization, names)."""


def _as_readonly(arr) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Alphabet:
    """A named finite alphabet with ordered, distinct symbol labels."""

    name: str
    symbols: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(str(s) for s in self.symbols))
        if not self.symbols:
            raise ProbabilityError(f"alphabet {self.name!r} has no symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ProbabilityError(f"alphabet {self.name!r} has duplicate symbols")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)


def binary(name: str) -> Alphabet:
    return Alphabet(name, ("0", "1"))


def nary(name: str, size: int) -> Alphabet:
    return Alphabet(name, tuple(str(i) for i in range(size)))


def singleton(name: str) -> Alphabet:
    """One-symbol alphabet, used to model an absent variable."""
    return Alphabet(name, ("*",))


@dataclass(frozen=True)
class JointDist:
    """A normalized joint PMF over an ordered tuple of alphabets."""

    variables: tuple[Alphabet, ...]
    mass: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        names = [a.name for a in self.variables]
        if len(set(names)) != len(names):
            raise ProbabilityError(f"duplicate variable names in {names}")
        mass = _as_readonly(self.mass)
        shape = tuple(a.size for a in self.variables)
        if mass.shape != shape:
            raise ProbabilityError(
                f"mass shape {mass.shape} does not match alphabet sizes {shape}"
            )
        if np.any(mass < 0):
            raise ProbabilityError("negative probability mass")
        total = float(mass.sum())
        if abs(total - 1.0) > NORM_TOL:
            raise ProbabilityError(f"mass sums to {total!r}, not 1")
        object.__setattr__(self, "mass", mass)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.variables)

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ProbabilityError(f"unknown variable {name!r}; have {self.names}") from None

    def alphabet(self, name: str) -> Alphabet:
        return self.variables[self.axis(name)]


@dataclass(frozen=True)
class CondChannel:
    """A conditional PMF from one named variable tuple to another.

    The kernel is indexed by the conditioning axes first, then the output
    axes, and every conditional slice sums to one.
    """

    from_vars: tuple[Alphabet, ...]
    to_vars: tuple[Alphabet, ...]
    kernel: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "from_vars", tuple(self.from_vars))
        object.__setattr__(self, "to_vars", tuple(self.to_vars))
        kernel = _as_readonly(self.kernel)
        shape = tuple(a.size for a in self.from_vars) + tuple(a.size for a in self.to_vars)
        if kernel.shape != shape:
            raise ProbabilityError(
                f"kernel shape {kernel.shape} does not match alphabets {shape}"
            )
        if np.any(kernel < 0):
            raise ProbabilityError("negative kernel entry")
        out_axes = tuple(range(len(self.from_vars), kernel.ndim))
        row_sums = kernel.sum(axis=out_axes)
        if np.any(np.abs(row_sums - 1.0) > NORM_TOL):
            raise ProbabilityError("conditional rows do not sum to 1")
        object.__setattr__(self, "kernel", kernel)

    @property
    def from_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.from_vars)

    @property
    def to_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.to_vars)


@dataclass(frozen=True)
class DistortionMeasure:
    """A per-symbol distortion table d(x, xhat) >= 0."""

    source_alphabet: Alphabet
    recon_alphabet: Alphabet
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        table = _as_readonly(self.table)
        shape = (self.source_alphabet.size, self.recon_alphabet.size)
        if table.shape != shape:
            raise ProbabilityError(f"distortion shape {table.shape}, expected {shape}")
        if np.any(~np.isfinite(table)) or np.any(table < 0):
            raise ProbabilityError("distortion entries must be finite and non-negative")
        object.__setattr__(self, "table", table)


def hamming(source_alphabet: Alphabet, recon_alphabet: Alphabet | None = None) -> DistortionMeasure:
    recon = recon_alphabet if recon_alphabet is not None else source_alphabet
    if recon.size != source_alphabet.size:
        raise ProbabilityError("Hamming distortion needs equal alphabet sizes")
    table = 1.0 - np.eye(source_alphabet.size)
    return DistortionMeasure(source_alphabet, recon, table)


# ---------------------------------------------------------------------------
# Channel constructors
# ---------------------------------------------------------------------------

def channel_from_matrix(from_alphabet: Alphabet, to_alphabet: Alphabet, matrix) -> CondChannel:
    return CondChannel((from_alphabet,), (to_alphabet,), np.asarray(matrix, dtype=np.float64))


def identity_channel(from_alphabet: Alphabet, to_alphabet: Alphabet) -> CondChannel:
    if to_alphabet.size != from_alphabet.size:
        raise ProbabilityError("identity channel needs equal sizes")
    return channel_from_matrix(from_alphabet, to_alphabet, np.eye(from_alphabet.size))


def constant_channel(from_alphabet: Alphabet, to_alphabet: Alphabet, index: int = 0) -> CondChannel:
    matrix = np.zeros((from_alphabet.size, to_alphabet.size))
    matrix[:, index] = 1.0
    return channel_from_matrix(from_alphabet, to_alphabet, matrix)


def bsc(from_alphabet: Alphabet, to_alphabet: Alphabet, crossover: float) -> CondChannel:
    if from_alphabet.size != 2 or to_alphabet.size != 2:
        raise ProbabilityError("BSC needs binary alphabets")
    p = float(crossover)
    return channel_from_matrix(from_alphabet, to_alphabet, [[1 - p, p], [p, 1 - p]])


# ---------------------------------------------------------------------------
# Core operations
# ---------------------------------------------------------------------------

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"


def attach(joint: JointDist, channel: CondChannel) -> JointDist:
    """Extend a joint with new variables drawn through a conditional channel.

    The channel's conditioning variables must all be present in the joint;
    its output variables are appended, and conditional independence of the
    outputs from the remaining variables holds by construction.
    """
    for a in channel.from_vars:
        ax = joint.axis(a.name)
        if joint.variables[ax].symbols != a.symbols:
            raise ProbabilityError(f"alphabet mismatch on {a.name!r}")
    for a in channel.to_vars:
        if a.name in joint.names:
            raise ProbabilityError(f"output variable {a.name!r} already present")
    n_in = len(joint.variables)
    if n_in + len(channel.to_vars) > len(_LETTERS):
        raise ProbabilityError("too many variables")
    joint_sub = _LETTERS[:n_in]
    from_sub = "".join(joint_sub[joint.axis(a.name)] for a in channel.from_vars)
    to_sub = _LETTERS[n_in:n_in + len(channel.to_vars)]
    mass = np.einsum(f"{joint_sub},{from_sub}{to_sub}->{joint_sub}{to_sub}",
                     joint.mass, channel.kernel)
    return JointDist(joint.variables + channel.to_vars, mass)


def compose(base: JointDist, vx: CondChannel, uv: CondChannel) -> JointDist:
    """Build p(x,y,z) * p(v|x) * p(u|v) over (X,Y,Z,V,U).

    The Markov chain U -> V -> X -> (Y,Z) holds by construction.
    """
    return attach(attach(base, vx), uv)


def marginalize(joint: JointDist, keep) -> JointDist:
    """Sum out every variable not named in `keep`, preserving `keep` order."""
    keep = list(keep)
    axes_keep = [joint.axis(name) for name in keep]
    drop = tuple(i for i in range(len(joint.variables)) if i not in axes_keep)
    mass = joint.mass.sum(axis=drop) if drop else joint.mass
    # reorder remaining axes to the requested order
    remaining = [i for i in range(len(joint.variables)) if i not in drop]
    perm = [remaining.index(ax) for ax in axes_keep]
    mass = np.transpose(mass, perm)
    return JointDist(tuple(joint.variables[ax] for ax in axes_keep), mass)


def plogp_sum(mass: np.ndarray) -> float:
    """Sum of p*log2(p) with the 0*log(0) = 0 convention."""
    flat = np.asarray(mass, dtype=np.float64).ravel()
    nz = flat > 0
    return float(np.sum(flat[nz] * np.log2(flat[nz])))


def entropy(joint: JointDist, names=None) -> float:
    """Shannon entropy H(names) in bits; all variables when names is None."""
    if names is None:
        names = joint.names
    names = list(names)
    if not names:
        return 0.0
    mass = marginalize(joint, names).mass if set(names) != set(joint.names) else joint.mass
    return max(0.0, -plogp_sum(mass))


def cond_entropy(joint: JointDist, target, given) -> float:
    """H(target | given) = H(target, given) - H(given), clamped at 0."""
    target, given = list(target), list(given)
    value = entropy(joint, target + given) - entropy(joint, given)
    return 0.0 if abs(value) < CLAMP_TOL else max(0.0, value)


def cond_mutual_info(joint: JointDist, a, b, c=()) -> float:
    """I(a;b|c) in bits, computed as H(a|c) - H(a|b,c); c may be empty."""
    a, b, c = list(a), list(b), list(c)
    groups = a + b + c
    if len(set(groups)) != len(groups):
        raise ProbabilityError(f"variable groups overlap: {a}, {b}, {c}")
    value = (entropy(joint, a + c) + entropy(joint, b + c)
             - entropy(joint, c) - entropy(joint, a + b + c))
    return 0.0 if abs(value) < CLAMP_TOL else value


def tv_distance(p: JointDist, q: JointDist) -> float:
    """Norm-1 distance sum |p - q|, in [0, 2]."""
    if p.names != q.names:
        raise ProbabilityError(f"variable mismatch: {p.names} vs {q.names}")
    for ap, aq in zip(p.variables, q.variables):
        if ap.symbols != aq.symbols:
            raise ProbabilityError(f"alphabet mismatch on {ap.name!r}")
    return float(np.abs(p.mass - q.mass).sum())


# ---------------------------------------------------------------------------
# Common sources
# ---------------------------------------------------------------------------

def source_from_flat(x: Alphabet, y: Alphabet, z: Alphabet, flat) -> JointDist:
    mass = np.asarray(flat, dtype=np.float64).reshape(x.size, y.size, z.size)
    return JointDist((x, y, z), mass)


def dsbs_source(p_y: float, p_z: float,
                names: tuple[str, str, str] = ("X", "Y", "Z")) -> JointDist:
    """Uniform binary X with Y = X xor Bern(p_y) and Z = X xor Bern(p_z),
    the two noises independent."""
    x, y, z = (binary(n) for n in names)
    mass = np.zeros((2, 2, 2))
    for xv, yv, zv in itertools.product(range(2), repeat=3):
        mass[xv, yv, zv] = 0.5 * (p_y if yv != xv else 1 - p_y) \
                               * (p_z if zv != xv else 1 - p_z)
    return JointDist((x, y, z), mass)


def no_si_source(x_mass, z_given_x,
                 names: tuple[str, str, str] = ("X", "Y", "Z")) -> JointDist:
    """Source with singleton decoder side information: p(x) and p(z|x)."""
    x_mass = np.asarray(x_mass, dtype=np.float64)
    z_given_x = np.asarray(z_given_x, dtype=np.float64)
    x = nary(names[0], x_mass.shape[0])
    y = singleton(names[1])
    z = nary(names[2], z_given_x.shape[1])
    mass = (x_mass[:, None] * z_given_x)[:, None, :]
    return JointDist((x, y, z), mass)


def random_joint(rng: np.random.Generator, variables: tuple[Alphabet, ...],
                 floor: float = 0.0) -> JointDist:
    shape = tuple(a.size for a in variables)
    mass = rng.random(shape) + floor
    return JointDist(variables, mass / mass.sum())


def random_channel(rng: np.random.Generator, from_alphabet: Alphabet,
                   to_alphabet: Alphabet, floor: float = 0.0) -> CondChannel:
    kernel = rng.random((from_alphabet.size, to_alphabet.size)) + floor
    kernel /= kernel.sum(axis=1, keepdims=True)
    return CondChannel((from_alphabet,), (to_alphabet,), kernel)
