"""Nonlinearities with stored distributional derivatives.

A one-dimensional entry (:class:`Univariate`) is a piecewise polynomial
(possibly absent) plus a finite list of point masses, together with its
ladder of distributional derivatives.  The ladder is written out explicitly
by each catalog constructor; nothing is differentiated symbolically.  Past
the end of the ladder a derivative is either identically zero (polynomials)
or unavailable (anything whose next derivative would be a derivative of a
point mass).

An n-dimensional :class:`GeneralizedFunction` is a finite linear
combination of tensor products of one-dimensional entries, so derivatives
distribute coordinate by coordinate.  A tensor factor made of point masses
in some coordinates and functions in others is a measure on an affine
subspace; the pairing code handles those directly.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DerivativeUnavailable, DimensionMismatch, InvalidParameter, ParseError

TENSOR = "⊗"

Atom = tuple[float, float]  # (location, weight)


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


@dataclass(frozen=True, eq=False)
class Univariate:
    """One-dimensional generalized function.

    ``pieces[k]`` holds ascending polynomial coefficients on the k-th interval
    cut out by the sorted ``breaks``; ``pieces == ()`` means no function part.
    The function part is right-continuous at breaks (a measure-zero choice).
    ``growth = (C, N)`` certifies ``|fn(x)| <= C (1 + |x|)**N``.
    """

    label: str
    breaks: tuple[float, ...] = ()
    pieces: tuple[tuple[float, ...], ...] = ()
    atoms: tuple[Atom, ...] = ()
    growth: tuple[float, float] = (0.0, 0.0)
    ladder: tuple["Univariate", ...] = ()
    zero_beyond: bool = False

    def __post_init__(self):
        if self.pieces and len(self.pieces) != len(self.breaks) + 1:
            raise InvalidParameter("need exactly one polynomial per interval")
        if list(self.breaks) != sorted(self.breaks) or len(set(self.breaks)) != len(self.breaks):
            raise InvalidParameter("breaks must be strictly increasing")
        if any(not math.isfinite(w) for _, w in self.atoms):
            raise InvalidParameter("atom weights must be finite")

    @property
    def has_fn(self) -> bool:
        return bool(self.pieces)

    @property
    def is_smooth(self) -> bool:
        """Function part is a single polynomial on the whole line."""
        return len(self.pieces) == 1

    @property
    def is_zero(self) -> bool:
        return not self.pieces and not self.atoms

    def intervals(self) -> list[tuple[float, float, tuple[float, ...]]]:
        edges = (-math.inf,) + tuple(self.breaks) + (math.inf,)
        return [(edges[k], edges[k + 1], c) for k, c in enumerate(self.pieces)]

    def fn(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.pieces:
            return np.zeros_like(x)
        if len(self.pieces) == 1:
            return P.polyval(x, self.pieces[0]) + np.zeros_like(x)
        idx = np.searchsorted(self.breaks, x, side="right")
        out = np.zeros_like(x)
        for k, coefs in enumerate(self.pieces):
            mask = idx == k
            if np.any(mask):
                out[mask] = P.polyval(x[mask], coefs)
        return out

    __call__ = fn

    def derivative(self, k: int) -> "Univariate":
        if k < 0:
            raise InvalidParameter("derivative order must be nonnegative")
        if k == 0:
            return self
        if k <= len(self.ladder):
            return self.ladder[k - 1]
        if self.zero_beyond:
            return ZERO
        raise DerivativeUnavailable(f"derivative of order {k} of {self.label} is not in the catalog")

    def __repr__(self):
        return f"Univariate({self.label})"


ZERO = Univariate("0", zero_beyond=True)


def _chain(levels: Sequence[Univariate], zero_beyond: bool) -> Univariate:
    """Attach derivative ladders: ``levels[k]`` is the k-th derivative of ``levels[0]``."""
    built: list[Univariate] = []
    for lvl in reversed(levels):
        built.insert(
            0,
            Univariate(
                lvl.label, lvl.breaks, lvl.pieces, lvl.atoms, lvl.growth,
                ladder=tuple(built), zero_beyond=zero_beyond,
            ),
        )
    return built[0]


def _atoms_label(atoms: Sequence[Atom]) -> str:
    parts = []
    for loc, w in atoms:
        coef = "" if w == 1 else "-" if w == -1 else f"{_fmt(w)}*"
        parts.append(f"{coef}delta({_fmt(loc)})")
    return " + ".join(parts).replace("+ -", "- ") or "0"


def _pp(label, breaks, pieces, growth) -> Univariate:
    return Univariate(label, tuple(float(b) for b in breaks), tuple(tuple(map(float, c)) for c in pieces),
                      growth=(float(growth[0]), float(growth[1])))


def _atoms(atoms: Sequence[Atom]) -> Univariate:
    atoms = tuple((float(a), float(w)) for a, w in atoms if w != 0)
    return Univariate(_atoms_label(atoms), atoms=atoms)


def piecewise_polynomial(breaks, pieces, label: str = "pp", growth=None) -> Univariate:
    """A function-only entry without a derivative ladder.

    ``growth`` defaults to a certificate computed from the coefficient sizes.
    """
    if growth is None:
        deg = max(len(c) for c in pieces) - 1
        growth = (sum(max(abs(v) for v in c) for c in pieces) * (deg + 1) + 1e-300, deg)
    return _pp(label, breaks, pieces, growth)


# catalog entries (one-dimensional)

def _mono1(k: int) -> Univariate:
    if k < 0:
        raise InvalidParameter("monomial exponent must be nonnegative")
    levels = []
    for j in range(k + 1):
        c = math.factorial(k) // math.factorial(k - j)
        p = k - j
        coefs = (0.0,) * p + (float(c),)
        label = str(c) if p == 0 else f"x^{p}" if c == 1 else f"{c}*x^{p}"
        levels.append(_pp(label, (), (coefs,), (c, p)))
    return _chain(levels, zero_beyond=True)


def _const1(c: float) -> Univariate:
    return _chain([_pp(_fmt(c), (), ((c,),), (abs(c), 0))], zero_beyond=True)


def _indicator1(a: float, b: float) -> Univariate:
    if not a < b:
        raise InvalidParameter(f"indicator needs a < b, got ({a}, {b})")
    breaks, pieces, atoms = [], [], []
    if math.isfinite(a):
        breaks.append(a)
        pieces.append((0.0,))
        atoms.append((a, 1.0))
    pieces.append((1.0,))
    if math.isfinite(b):
        breaks.append(b)
        pieces.append((0.0,))
        atoms.append((b, -1.0))
    if not breaks:
        return _const1(1.0)
    label = f"ind(a={_fmt(a)},b={_fmt(b)})"
    return _chain([_pp(label, breaks, pieces, (1, 0)), _atoms(atoms)], zero_beyond=False)


def _clip1(tau: float) -> Univariate:
    if not tau > 0 or not math.isfinite(tau):
        raise InvalidParameter(f"tau must be positive and finite, got {tau}")
    clip = _pp(f"clip(tau={_fmt(tau)})", (-tau, tau), ((-tau,), (0.0, 1.0), (tau,)), (tau, 0))
    ind = _pp(f"ind(a={_fmt(-tau)},b={_fmt(tau)})", (-tau, tau), ((0.0,), (1.0,), (0.0,)), (1, 0))
    return _chain([clip, ind, _atoms([(-tau, 1.0), (tau, -1.0)])], zero_beyond=False)


def _sign1() -> Univariate:
    return _chain([_pp("sign()", (0.0,), ((-1.0,), (1.0,)), (1, 0)), _atoms([(0.0, 2.0)])],
                  zero_beyond=False)


def _relu1() -> Univariate:
    relu = _pp("relu()", (0.0,), ((0.0,), (0.0, 1.0)), (1, 1))
    step = _pp("ind(a=0,b=inf)", (0.0,), ((0.0,), (1.0,)), (1, 0))
    return _chain([relu, step, _atoms([(0.0, 1.0)])], zero_beyond=False)


def _dirac1(loc: float, weight: float = 1.0) -> Univariate:
    return _chain([_atoms([(loc, weight)])], zero_beyond=False)


# multivariate representation

@dataclass(frozen=True, eq=False)
class Term:
    coef: complex
    factors: tuple[Univariate, ...]


@dataclass(frozen=True, eq=False)
class GeneralizedFunction:
    """Finite sum of ``coef * f_1(x_1) ... f_n(x_n)`` with 1-d catalog factors."""

    n: int
    terms: tuple[Term, ...]
    label: str = ""

    def __post_init__(self):
        if self.n < 1:
            raise InvalidParameter("dimension must be positive")
        for t in self.terms:
            if len(t.factors) != self.n:
                raise DimensionMismatch("term with wrong number of factors")
        if not self.label:
            object.__setattr__(self, "label", _label_terms(self.terms))

    # structure

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_singular(self) -> bool:
        """Carries point masses in at least one coordinate of some term."""
        return any(f.atoms for t in self.terms for f in t.factors)

    @property
    def is_smooth(self) -> bool:
        """Polynomial function part only: no breaks and no atoms anywhere."""
        return all(f.is_smooth and not f.atoms for t in self.terms for f in t.factors)

    @property
    def is_complex(self) -> bool:
        return any(isinstance(t.coef, complex) and t.coef.imag != 0 for t in self.terms)

    def breakpoints(self, axis: int) -> tuple[float, ...]:
        """All discontinuity/kink locations along one axis (rectangle edges)."""
        return tuple(sorted({b for t in self.terms for b in t.factors[axis].breaks}))

    @property
    def growth_cert(self) -> tuple[float, float]:
        C, N = 0.0, 0.0
        for t in self.terms:
            if all(f.has_fn for f in t.factors):
                C += abs(t.coef) * math.prod(f.growth[0] for f in t.factors)
                N = max(N, sum(f.growth[1] for f in t.factors))
        return C, N

    def __call__(self, x) -> np.ndarray:
        """Evaluate the function part at points of shape (..., n)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DimensionMismatch(f"expected points with last axis {self.n}, got {x.shape}")
        dtype = complex if self.is_complex else float
        out = np.zeros(x.shape[:-1], dtype=dtype)
        for t in self.terms:
            if all(f.has_fn for f in t.factors):
                val = np.full(x.shape[:-1], t.coef, dtype=dtype)
                for k, f in enumerate(t.factors):
                    val = val * f.fn(x[..., k])
                out = out + val
        return out

    fn_part = __call__

    @property
    def atom_part(self) -> list[tuple[tuple[float, ...], complex]]:
        """Point masses: products of atoms over every coordinate of a term."""
        out = []
        for t in self.terms:
            if all(f.atoms for f in t.factors):
                for combo in itertools.product(*(f.atoms for f in t.factors)):
                    point = tuple(a for a, _ in combo)
                    out.append((point, t.coef * math.prod(w for _, w in combo)))
        return out

    def derivative(self, gamma: Sequence[int]) -> "GeneralizedFunction":
        gamma = tuple(int(g) for g in gamma)
        if len(gamma) != self.n:
            raise DimensionMismatch(f"multiindex of length {len(gamma)} for n={self.n}")
        if any(g < 0 for g in gamma):
            raise InvalidParameter("multiindex entries must be nonnegative")
        if not any(gamma):
            return self
        terms = []
        for t in self.terms:
            factors = tuple(f.derivative(g) for f, g in zip(t.factors, gamma))
            if not any(f.is_zero for f in factors):
                terms.append(Term(t.coef, factors))
        label = f"d^{gamma}[{self.label}]"
        return GeneralizedFunction(self.n, tuple(terms), label if terms else "0")

    # algebra

    def __add__(self, other: "GeneralizedFunction") -> "GeneralizedFunction":
        if not isinstance(other, GeneralizedFunction):
            return NotImplemented
        if other.n != self.n:
            raise DimensionMismatch("cannot add generalized functions of different dimension")
        label = f"{self.label} + {other.label}"
        return GeneralizedFunction(self.n, self.terms + other.terms, label)

    def __mul__(self, c) -> "GeneralizedFunction":
        if not isinstance(c, (int, float, complex)):
            return NotImplemented
        terms = tuple(Term(c * t.coef, t.factors) for t in self.terms) if c != 0 else ()
        return GeneralizedFunction(self.n, terms, f"{_fmt_coef(c)}*({self.label})")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __repr__(self):
        return f"GeneralizedFunction(n={self.n}, {self.label})"


def _fmt_coef(c) -> str:
    return repr(c) if isinstance(c, complex) else _fmt(c)


def _label_terms(terms) -> str:
    if not terms:
        return "0"
    parts = []
    for t in terms:
        body = TENSOR.join(f.label for f in t.factors)
        parts.append(body if t.coef == 1 else f"{_fmt_coef(t.coef)}*{body}")
    return " + ".join(parts)


def _lift(u: Univariate, coef=1.0) -> GeneralizedFunction:
    return GeneralizedFunction(1, (Term(coef, (u,)),), u.label)


def clip_1d(tau: float) -> GeneralizedFunction:
    """Hard limiter: clamp of x to [-tau, tau]."""
    return _lift(_clip1(float(tau)))


def sign() -> GeneralizedFunction:
    return _lift(_sign1())


def relu() -> GeneralizedFunction:
    """Positive part max(x, 0)."""
    return _lift(_relu1())


def indicator(a: float, b: float) -> GeneralizedFunction:
    """Indicator of the interval (a, b); either end may be infinite."""
    return _lift(_indicator1(float(a), float(b)))


def dirac(loc: float = 0.0, weight: float = 1.0) -> GeneralizedFunction:
    return _lift(_dirac1(float(loc), float(weight)))


def constant(c: float = 1.0, n: int = 1) -> GeneralizedFunction:
    g = tensor([_lift(_const1(float(c)))] + [_lift(_const1(1.0))] * (n - 1))
    return GeneralizedFunction(n, g.terms, _fmt(c) if n == 1 else f"const(c={_fmt(c)},n={n})")


def monomial(gamma: Sequence[int]) -> GeneralizedFunction:
    gamma = tuple(int(g) for g in gamma)
    if not gamma:
        raise InvalidParameter("monomial needs at least one exponent")
    g = tensor([_lift(_mono1(k)) for k in gamma])
    return GeneralizedFunction(g.n, g.terms, f"mono({','.join(map(str, gamma))})")


def tensor(parts: Sequence[GeneralizedFunction]) -> GeneralizedFunction:
    """Tensor product; dimensions add and terms multiply out."""
    parts = list(parts)
    if not parts:
        raise InvalidParameter("tensor of an empty list")
    n = sum(p.n for p in parts)
    terms = []
    for combo in itertools.product(*(p.terms for p in parts)):
        coef = math.prod(t.coef for t in combo)
        factors = tuple(f for t in combo for f in t.factors)
        terms.append(Term(coef, factors))
    label = TENSOR.join(p.label if len(p.terms) <= 1 else f"({p.label})" for p in parts)
    return GeneralizedFunction(n, tuple(terms), label)


def weak_derivative(g: GeneralizedFunction, gamma: Sequence[int]) -> GeneralizedFunction:
    """Distributional derivative from the stored ladders; raises DerivativeUnavailable."""
    return g.derivative(gamma)


def audit_growth(g: GeneralizedFunction, count: int = 10_000, box: float = 50.0, seed: int = 0) -> bool:
    """Sampled check of the growth certificate on [-box, box]^n (not a proof)."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-box, box, size=(count, g.n))
    C, N = g.growth_cert
    bound = C * (1.0 + np.linalg.norm(x, axis=-1)) ** N
    return bool(np.all(np.abs(g(x)) <= bound * (1 + 1e-12)))


# catalog-string parser:  expr := [sign] term (sign term)* ; term := [number '*'] factor (⊗ factor)*

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?|inf)|(?P<name>[A-Za-z_]\w*)"
    r"|(?P<op>⊗|\(x\)|[(),=+\-*]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ParseError("unexpected character", text, pos + len(text[pos:]) - len(text[pos:].lstrip()))
            kind = m.lastgroup
            val = m.group(kind)
            start = m.start(kind)
            if kind == "op" and val == "(x)":
                val = TENSOR
            if kind == "name" and val == "inf":
                kind = "num"
            self.tokens.append((kind, val, start))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("end", "", len(self.text))

    def take(self, kind=None, val=None):
        tok = self.peek()
        if (kind and tok[0] != kind) or (val and tok[1] != val):
            want = val or kind
            raise ParseError(f"expected {want!r}, found {tok[1] or 'end of input'!r}", self.text, tok[2])
        self.i += 1
        return tok

    def parse(self) -> GeneralizedFunction:
        result = self.signed_term()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            pos = self.peek()[2]
            term = self.signed_term()
            if term.n != result.n:
                raise ParseError(f"dimension {term.n} does not match {result.n}", self.text, pos)
            label = f"{result.label} + {term.label}".replace("+ -", "- ")
            result = GeneralizedFunction(result.n, result.terms + term.terms, label)
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected {tok[1]!r}", self.text, tok[2])
        return result

    def signed_term(self) -> GeneralizedFunction:
        negate = False
        if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            negate = self.take()[1] == "-"
        term = self.term()
        if negate:
            terms = tuple(Term(-t.coef, t.factors) for t in term.terms)
            term = GeneralizedFunction(term.n, terms, f"-{term.label}")
        return term

    def term(self) -> GeneralizedFunction:
        coef = 1.0
        if self.peek()[0] == "num":
            coef = float(self.take()[1])
            self.take("op", "*")
        parts = [self.factor()]
        while self.peek()[1] == TENSOR:
            self.take()
            parts.append(self.factor())
        g = tensor(parts) if len(parts) > 1 else parts[0]
        return g * coef if coef != 1.0 else g

    def factor(self) -> GeneralizedFunction:
        kind, name, pos = self.take("name")
        self.take("op", "(")
        args, kwargs = [], {}
        while self.peek()[1] != ")":
            if args or kwargs:
                self.take("op", ",")
            sgn = 1.0
            if self.peek()[1] == "-":
                self.take()
                sgn = -1.0
            tok = self.peek()
            if tok[0] == "name":
                key = self.take()[1]
                self.take("op", "=")
                sgn2 = 1.0
                if self.peek()[1] == "-":
                    self.take()
                    sgn2 = -1.0
                kwargs[key] = sgn2 * float(self.take("num")[1])
            else:
                args.append(sgn * float(self.take("num")[1]))
        self.take("op", ")")
        try:
            return _build(name, args, kwargs)
        except (InvalidParameter, TypeError, KeyError, ValueError) as exc:
            raise ParseError(f"bad arguments for {name!r} ({exc})", self.text, pos) from None


def _build(name: str, args: list[float], kwargs: dict[str, float]) -> GeneralizedFunction:
    def one(key, default=None):
        if args:
            if len(args) != 1 or kwargs:
                raise InvalidParameter("expected a single argument")
            return args[0]
        if key in kwargs:
            if set(kwargs) != {key}:
                raise InvalidParameter(f"unknown keyword among {sorted(kwargs)}")
            return kwargs[key]
        if default is None:
            raise InvalidParameter(f"missing {key}")
        return default

    if name == "clip":
        return clip_1d(one("tau"))
    if name == "mono":
        if kwargs or not args or any(a != int(a) or a < 0 for a in args):
            raise InvalidParameter("mono takes nonnegative integer exponents")
        return monomial([int(a) for a in args])
    if name in ("sign", "relu", "step"):
        if args or kwargs:
            raise InvalidParameter(f"{name} takes no arguments")
        return {"sign": sign, "relu": relu, "step": lambda: indicator(0.0, math.inf)}[name]()
    if name == "ind":
        if args:
            a, b = args
        else:
            a, b = kwargs.pop("a", -math.inf), kwargs.pop("b", math.inf)
            if kwargs:
                raise InvalidParameter(f"unknown keyword {sorted(kwargs)}")
        return indicator(a, b)
    if name in ("one", "const"):
        return constant(one("c", 1.0))
    if name == "dirac":
        loc = kwargs.pop("at", args[0] if args else 0.0)
        w = kwargs.pop("w", args[1] if len(args) > 1 else 1.0)
        if kwargs:
            raise InvalidParameter(f"unknown keyword {sorted(kwargs)}")
        return dirac(loc, w)
    raise InvalidParameter(f"unknown nonlinearity {name!r}")


def parse(text: str) -> GeneralizedFunction:
    """Parse a catalog expression such as ``"clip(tau=1)⊗clip(tau=1)"`` or
    ``"mono(2,1) - 0.5*sign()⊗relu()"``.  ``(x)`` is accepted for ``⊗``.
    """
    if not text or not text.strip():
        raise ParseError("empty nonlinearity", text, 0)
    return _Parser(text).parse()
