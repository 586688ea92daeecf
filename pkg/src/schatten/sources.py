"""Matrix sources addressed by short strings.

    synth:<family>:<n>[:seed]   synthetic Q D Q^T test matrix
    mm:<path>                   Matrix Market file
    trefethen:<n>               Trefethen matrix (primes + power-of-two bands)
    eye:<n>                     identity
    diag:<v1>,<v2>,...          diagonal matrix
    oed[:key=value,...]         posterior covariance of the heat-equation model
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .linops import LinearOperator, diagonal, identity
from .matgen import SyntheticSpec, gen_synthetic, load_matrix_market, trefethen
from .montecarlo import NotSPSDError, spsd_eigenvalues
from .oed import HeatModel, PosteriorCovOp

OED_KEYS = {"nx": int, "nt": int, "k": float, "diffusion": float, "sigma": float,
            "gamma": float, "t_f": float, "n_sensors": int}


class SourceError(ValueError):
    """Unparseable matrix source string."""


@dataclass
class Source:
    op: LinearOperator
    label: str
    eigenvalues: np.ndarray | None = None
    model: HeatModel | None = None

    def exact_eigenvalues(self) -> np.ndarray:
        """Known spectrum, or a dense eigendecomposition (cached)."""
        if self.eigenvalues is None:
            self.eigenvalues = spsd_eigenvalues(self.op)
        lam = self.eigenvalues
        if lam.size and lam.min() < -1e-10 * np.abs(lam).max():
            raise NotSPSDError(f"{self.label} has a negative eigenvalue {lam.min():.3e}")
        return lam


def parse_oed_options(text: str) -> dict:
    opts = {}
    for item in filter(None, text.split(",")):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or key not in OED_KEYS:
            raise SourceError(f"bad oed option {item!r}; known keys: {sorted(OED_KEYS)}")
        opts["k" if key == "diffusion" else key] = OED_KEYS[key](val)
    return opts


def heat_model(**overrides) -> HeatModel:
    names = {f.name for f in fields(HeatModel)}
    return HeatModel(**{k: v for k, v in overrides.items() if k in names and v is not None})


def resolve(src: str, oed_overrides: dict | None = None, solver: str = "woodbury") -> Source:
    kind, _, rest = src.partition(":")
    try:
        if kind == "synth":
            parts = rest.split(":")
            family, n = parts[0], int(parts[1]) if len(parts) > 1 and parts[1] else 100
            seed = int(parts[2]) if len(parts) > 2 else 0
            op, d = gen_synthetic(SyntheticSpec(family, n, seed))
            return Source(op, family, np.sort(d))
        if kind == "mm":
            if not rest:
                raise SourceError("mm: needs a file path")
            return Source(load_matrix_market(rest), rest.rsplit("/", 1)[-1].removesuffix(".mtx"))
        if kind == "trefethen":
            n = int(rest or 700)
            return Source(trefethen(n), f"trefethen_{n}")
        if kind == "eye":
            n = int(rest)
            return Source(identity(n), f"identity_{n}", np.ones(n))
        if kind == "diag":
            vals = np.array([float(v) for v in rest.split(",")])
            return Source(diagonal(vals), "diag", np.sort(vals))
        if kind == "oed":
            opts = dict(oed_overrides or {})
            opts.update(parse_oed_options(rest))
            model = heat_model(**opts)
            return Source(PosteriorCovOp(model, solver=solver), "oed", model=model)
    except (IndexError, ValueError) as exc:
        # subclasses (file-format, alignment errors) carry their own meaning
        if type(exc) not in (ValueError, IndexError):
            raise
        raise SourceError(f"cannot parse matrix source {src!r}: {exc}") from exc
    raise SourceError(f"unknown matrix source {src!r}; expected synth:, mm:, trefethen:, eye:, diag: or oed")
