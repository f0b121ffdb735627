"""Experiment configuration: one JSON document, validated and resolvable.

Defaults reproduce the reference experiment of the built-in cosine model:
n = 5e4 steps, 1e4 Monte Carlo replicates, thresholds 0..2 in steps of
0.05, theta = 1/3 + 1e-3.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import expressions, model as model_mod
from .model import VarianceProxies
from .simulate import GaussianInitial, InitialLaw, PointInitial
from .steps import Holder, Lipschitz, RegularityMode, StepSchedule, validate_theta

__all__ = ["AGrid", "InlineModel", "ExperimentConfig", "ConfigError", "RunSetup"]


class ConfigError(ValueError):
    """Configuration failed validation; message lists field-level issues."""


@dataclass(frozen=True)
class AGrid:
    start: float = 0.0
    stop: float = 2.0
    count: int = 41

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class InlineModel:
    """Coefficient expressions for a user model (see expressions module)."""

    d: int
    r: int
    b: tuple[str, ...]
    sigma: tuple[tuple[str, ...], ...]
    phi: str
    # Box over which sup norms and Lipschitz constants are estimated.
    sup_box: tuple[tuple[float, float], ...] = ((-10.0, 10.0),)


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "cosine-ou"
    inline_model: InlineModel | None = None
    gamma1: float = 1.0
    theta: float = 1.0 / 3.0 + 1e-3
    regularity: str = "holder"
    beta: float = 1.0
    innovation: str = "gaussian"
    initial: str = "gaussian"
    initial_point: tuple[float, ...] = ()
    n: int = 50_000
    mc: int = 10_000
    a_grid: AGrid = field(default_factory=AGrid)
    seed: int = 0
    rho_grid_steps: int = 500_000
    proxies: dict[str, float] = field(default_factory=dict)
    threads: int = 0
    replicate_block: int = 1024
    step_chunk: int = 1024
    out_dir: str = "out"

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        data = asdict(self)
        data["a_grid"] = asdict(self.a_grid)
        if self.inline_model is not None:
            data["inline_model"] = asdict(self.inline_model)
        data["initial_point"] = list(self.initial_point)
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "a_grid" in kwargs and isinstance(kwargs["a_grid"], dict):
            kwargs["a_grid"] = AGrid(**kwargs["a_grid"])
        if kwargs.get("inline_model") is not None and isinstance(
            kwargs["inline_model"], dict
        ):
            im = dict(kwargs["inline_model"])
            im["b"] = tuple(im.get("b", ()))
            im["sigma"] = tuple(tuple(row) for row in im.get("sigma", ()))
            im["sup_box"] = tuple(tuple(pair) for pair in im.get("sup_box", ((-10.0, 10.0),)))
            kwargs["inline_model"] = InlineModel(**im)
        if "initial_point" in kwargs:
            kwargs["initial_point"] = tuple(kwargs["initial_point"])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    # -- validation / resolution -------------------------------------------

    def regularity_mode(self) -> RegularityMode:
        if self.regularity == "holder":
            return Holder(self.beta)
        if self.regularity == "lipschitz":
            return Lipschitz()
        raise ConfigError(f"regularity must be 'holder' or 'lipschitz', got {self.regularity!r}")

    def validate(self) -> None:
        issues: list[str] = []
        if self.mc < 1:
            issues.append("mc: must be >= 1")
        if self.n < 1:
            issues.append("n: must be >= 1")
        if self.a_grid.count < 1:
            issues.append("a_grid.count: must be >= 1")
        if self.a_grid.count > 1 and not self.a_grid.stop > self.a_grid.start:
            issues.append("a_grid: stop must exceed start")
        if self.rho_grid_steps < 2:
            issues.append("rho_grid_steps: must be >= 2")
        if self.replicate_block < 1:
            issues.append("replicate_block: must be >= 1")
        if self.threads < 0:
            issues.append("threads: must be >= 0")
        if self.innovation not in ("gaussian", "bernoulli"):
            issues.append(f"innovation: unknown law {self.innovation!r}")
        if self.initial not in ("gaussian", "point"):
            issues.append(f"initial: unknown law {self.initial!r}")
        try:
            schedule = StepSchedule(gamma1=self.gamma1, theta=self.theta)
        except ValueError as exc:
            issues.append(f"schedule: {exc}")
            schedule = None
        try:
            mode = self.regularity_mode()
        except ConfigError as exc:
            issues.append(str(exc))
            mode = None
        except ValueError as exc:
            issues.append(f"beta: {exc}")
            mode = None
        if schedule is not None and mode is not None:
            verdict = validate_theta(schedule, mode)
            if not verdict.accepted:
                issues.append(f"theta: {verdict.reason}")
        if self.model not in model_mod.MODEL_REGISTRY and self.inline_model is None:
            issues.append(f"model: unknown key {self.model!r} and no inline model given")
        if issues:
            raise ConfigError("; ".join(issues))

    def resolve(self) -> "RunSetup":
        """Validate and materialize runtime objects."""
        self.validate()
        schedule = StepSchedule(gamma1=self.gamma1, theta=self.theta)
        source_lip = None
        if self.inline_model is not None:
            im = self.inline_model
            try:
                mdl = expressions.model_from_expressions(
                    im.d, im.r, list(im.b), [list(row) for row in im.sigma], name=self.model
                )
                pack = expressions.pack_from_expression(im.d, im.phi)
            except expressions.ExpressionError as exc:
                raise ConfigError(f"inline_model: {exc}") from exc
            proxies = _estimate_proxies(mdl, pack, im, self.proxies)
        else:
            bundle = model_mod.get_model(self.model)
            mdl, pack = bundle.model, bundle.pack
            source_lip = bundle.source_lip
            proxies = bundle.proxies
            if self.proxies:
                proxies = proxies.with_overrides(**self.proxies)
        innovation = (
            model_mod.StandardGaussian()
            if self.innovation == "gaussian"
            else model_mod.SymmetrizedBernoulli()
        )
        initial: InitialLaw
        if self.initial == "gaussian":
            initial = GaussianInitial()
        else:
            if len(self.initial_point) != mdl.d:
                raise ConfigError(
                    f"initial_point: needs {mdl.d} coordinates, got {len(self.initial_point)}"
                )
            initial = PointInitial(point=self.initial_point)
        return RunSetup(
            config=self,
            model=mdl,
            pack=pack,
            schedule=schedule,
            proxies=proxies,
            innovation=innovation,
            initial=initial,
            source_lip=source_lip,
        )


def _estimate_proxies(
    mdl, pack, inline: InlineModel, overrides: dict[str, float]
) -> VarianceProxies:
    """Grid-estimated sup norms over the declared box for inline models.

    nu_* entries default to the crude caps unless overridden; estimating
    them properly is what the `carre` command is for.
    """
    grids = [np.linspace(lo, hi, 2001) for lo, hi in inline.sup_box]
    mesh = np.stack(np.meshgrid(*grids, indexing="ij"), axis=-1).reshape(-1, mdl.d)
    sx = mdl.sigma(mesh)
    sigma_sup = float(np.sqrt(np.einsum("...ij,...ij->...", sx, sx).max()))
    gx = pack.grad_phi(mesh)
    grad_sup = float(np.sqrt(np.einsum("...i,...i->...", gx, gx).max()))
    values = {
        "nu_carre": sigma_sup**2 * grad_sup**2,
        "nu_sigma2": sigma_sup**2,
        "sigma_sup": sigma_sup,
        "grad_phi_sup": grad_sup,
        "theta_lip": 1.0,
        "alpha": 1.0,
        "p_confluence": 1.5,
    }
    values.update(overrides)
    return VarianceProxies(**values)


@dataclass(frozen=True)
class RunSetup:
    """Resolved runtime objects for one experiment configuration."""

    config: ExperimentConfig
    model: object
    pack: object
    schedule: StepSchedule
    proxies: VarianceProxies
    innovation: object
    initial: object
    source_lip: float | None

    def metadata(self) -> dict:
        cfg = self.config
        return {
            "n": cfg.n,
            "theta": cfg.theta,
            "gamma1": cfg.gamma1,
            "mc": cfg.mc,
            "seed": cfg.seed,
            "model": cfg.model,
        }
