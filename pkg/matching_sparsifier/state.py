import json
import math
import os
import sys
import traceback

from enum import StrEnum
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from matching_sparsifier.graph import (
    WeightedGraph,
    clique_graph,
    cycle_graph,
    erdos_renyi,
    path_graph,
    read_graph,
)
from matching_sparsifier.misc import ParseError
from matching_sparsifier.rng import Purpose, RngStream


SCHEMA_VERSION = 1


class GraphKind(StrEnum):
    """
    Graph families the generator spec understands.
    """

    ER = "er"
    PATH = "path"
    CYCLE = "cycle"
    CLIQUE = "clique"


class GeneratorSpec:
    """
    A parsed generator spec such as `er:n=16,m=30,wmin=1,wmax=10`.
    """

    def __init__(
        self,
        kind: GraphKind,
        n: int,
        m: Optional[int] = None,
        wmin: int = 1,
        wmax: int = 10,
        w: Optional[Fraction] = None,
    ) -> None:
        self.kind = kind
        self.n = n
        self.m = m
        self.wmin = wmin
        self.wmax = wmax
        self.w = w

    @staticmethod
    def parse(text: str) -> "GeneratorSpec":
        kind_text, _, rest = text.partition(":")
        try:
            kind = GraphKind(kind_text.strip().lower())
        except ValueError as e:
            raise ParseError(f"Unknown graph generator: {kind_text!r}") from e

        values: dict[str, str] = {}
        for item in rest.split(","):
            if item.strip() == "":
                continue
            key, sep, value = item.partition("=")
            if sep == "":
                raise ParseError(f"Generator parameter must be key=value: {item!r}")
            values[key.strip()] = value.strip()

        unknown = set(values) - {"n", "m", "wmin", "wmax", "w"}
        if unknown:
            raise ParseError(
                f"Unknown generator parameters: {', '.join(sorted(unknown))}"
            )
        try:
            n = int(values["n"])
            m = int(values["m"]) if "m" in values else None
            wmin = int(values.get("wmin", "1"))
            wmax = int(values.get("wmax", "10"))
            w = Fraction(values["w"]) if "w" in values else None
        except KeyError as e:
            raise ParseError(f"Generator spec {text!r} is missing n") from e
        except (ValueError, ZeroDivisionError) as e:
            raise ParseError(f"Invalid generator spec {text!r}: {e}") from e

        spec = GeneratorSpec(kind, n, m, wmin, wmax, w)
        problems = spec.problems()
        if problems:
            raise ParseError(f"Invalid generator spec {text!r}: {problems[0]}")
        return spec

    def problems(self) -> list[str]:
        problems: list[str] = []
        if self.n < 0:
            problems.append("n must be nonnegative")
        if self.kind == GraphKind.ER:
            if self.m is None:
                problems.append("er graphs need m")
            elif not 0 <= self.m <= self.n * (self.n - 1) // 2:
                problems.append(f"m must lie in [0, {self.n * (self.n - 1) // 2}]")
        elif self.m is not None:
            problems.append(f"{self.kind} graphs take no m")
        if self.kind == GraphKind.CYCLE and self.n < 3:
            problems.append("cycles need n >= 3")
        if self.w is None and not 0 <= self.wmin <= self.wmax:
            problems.append("weights need 0 <= wmin <= wmax")
        if self.w is not None and self.w < 0:
            problems.append("w must be nonnegative")
        return problems

    def build(self, rng: RngStream) -> WeightedGraph:
        if self.kind == GraphKind.ER:
            assert self.m is not None
            return erdos_renyi(self.n, self.m, rng, self.wmin, self.wmax, self.w)
        if self.kind == GraphKind.PATH:
            return path_graph(self.n, rng, self.wmin, self.wmax, self.w)
        if self.kind == GraphKind.CYCLE:
            return cycle_graph(self.n, rng, self.wmin, self.wmax, self.w)
        return clique_graph(self.n, rng, self.wmin, self.wmax, self.w)

    def __str__(self) -> str:
        parts = [f"n={self.n}"]
        if self.m is not None:
            parts.append(f"m={self.m}")
        if self.w is not None:
            parts.append(f"w={self.w}")
        else:
            parts.append(f"wmin={self.wmin}")
            parts.append(f"wmax={self.wmax}")
        return f"{self.kind}:{','.join(parts)}"


class SparsifierConfig:
    """
    Parameters of the greedy and sampling stages.

    `epsilon` and `p` are exact rationals; they are written to the config
    file as decimal strings.
    """

    def __init__(
        self,
        epsilon: Fraction = Fraction(3, 10),
        p: Fraction = Fraction(1, 2),
        lambda_constant: int = 1,
        lambda_cap: int = 8,
        r_override: Optional[int] = None,
        r_cap: int = 4096,
        strict_r: bool = False,
        q_samples: int = 1000,
        opt_samples: int = 1000,
        blossom_cap: int = 7,
        weight_denominator: Optional[int] = None,
    ) -> None:
        self.epsilon = Fraction(epsilon)
        self.p = Fraction(p)
        self.lambda_constant = lambda_constant
        self.lambda_cap = lambda_cap
        self.r_override = r_override
        self.r_cap = r_cap
        self.strict_r = strict_r
        self.q_samples = q_samples
        self.opt_samples = opt_samples
        self.blossom_cap = blossom_cap
        self.weight_denominator = weight_denominator

    def with_r(self, r: Optional[int]) -> "SparsifierConfig":
        copy = SparsifierConfig.from_dict(self.to_dict())
        copy.r_override = r
        return copy

    def problems(self) -> list[str]:
        problems: list[str] = []
        if not 0 < self.epsilon < 1:
            problems.append(f"epsilon must lie in (0, 1): {self.epsilon}")
        if not 0 < self.p <= 1:
            problems.append(f"p must lie in (0, 1]: {self.p}")
        if self.lambda_constant < 0:
            problems.append("lambda_constant must be nonnegative")
        if self.lambda_cap < 1:
            problems.append("lambda_cap must be at least 1")
        if self.r_override is not None and self.r_override < 1:
            problems.append("r_override must be at least 1")
        if self.r_cap < 1:
            problems.append("r_cap must be at least 1")
        if self.q_samples < 1 or self.opt_samples < 1:
            problems.append("q_samples and opt_samples must be at least 1")
        if self.blossom_cap < 3:
            problems.append("blossom_cap must be at least 3")
        if self.weight_denominator is not None and self.weight_denominator < 1:
            problems.append("weight_denominator must be at least 1")
        return problems

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": str(self.epsilon),
            "p": str(self.p),
            "lambda_constant": self.lambda_constant,
            "lambda_cap": self.lambda_cap,
            "r_override": self.r_override,
            "r_cap": self.r_cap,
            "strict_r": self.strict_r,
            "q_samples": self.q_samples,
            "opt_samples": self.opt_samples,
            "blossom_cap": self.blossom_cap,
            "weight_denominator": self.weight_denominator,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "SparsifierConfig":
        assert isinstance(d, dict), "sparsifier section must be an object"
        cfg = SparsifierConfig()

        for key in ("epsilon", "p"):
            v = d.get(key)
            assert v is None or isinstance(v, (str, int)), f"{key}: {v!r}"
            if v is not None:
                try:
                    setattr(cfg, key, Fraction(v))
                except (ValueError, ZeroDivisionError):
                    raise AssertionError(f"{key}: {v!r}")

        for key in ("lambda_constant", "lambda_cap", "r_cap", "q_samples",
                    "opt_samples", "blossom_cap"):
            v = d.get(key)
            assert v is None or isinstance(v, int), f"{key}: {v!r}"
            if v is not None:
                setattr(cfg, key, v)

        for key in ("r_override", "weight_denominator"):
            v = d.get(key)
            assert v is None or isinstance(v, int), f"{key}: {v!r}"
            setattr(cfg, key, v)

        v = d.get("strict_r")
        assert v is None or isinstance(v, bool), f"strict_r: {v!r}"
        if v is not None:
            cfg.strict_r = v

        return cfg


class VimatchParams:
    """
    Parameters of the vertex-independent matching recursion.
    """

    def __init__(
        self,
        alpha: int = 3,
        t: int = 2,
        l: int = 4,
        k_gamma: int = 64,
        walk_cap: int = 5000,
        k_z: int = 200,
        recursion_budget: int = 1_000_000,
        asymptotic: bool = False,
        c_t: int = 1,
    ) -> None:
        self.alpha = alpha
        self.t = t
        self.l = l
        self.k_gamma = k_gamma
        self.walk_cap = walk_cap
        self.k_z = k_z
        self.recursion_budget = recursion_budget
        self.asymptotic = asymptotic
        self.c_t = c_t

    def resolved(self, epsilon: Fraction) -> "VimatchParams":
        """
        The parameters actually used: the asymptotic formulas in ε when
        `asymptotic` is set, else `self`.
        """
        if not self.asymptotic:
            return self
        copy = VimatchParams.from_dict(self.to_dict())
        copy.alpha = math.ceil(Fraction(1) / epsilon**12) + 1
        copy.t = math.ceil(self.c_t / epsilon**20)
        l = math.ceil(3 / epsilon**3)
        copy.l = l + (-l) % 4
        return copy

    def problems(self) -> list[str]:
        problems: list[str] = []
        if self.alpha < 2:
            problems.append("alpha must be at least 2")
        if self.t < 0:
            problems.append("t must be nonnegative")
        if self.l < 4 or self.l % 4 != 0:
            problems.append(f"l must be a positive multiple of 4: {self.l}")
        if self.k_gamma < 1 or self.k_z < 1:
            problems.append("k_gamma and k_z must be at least 1")
        if self.walk_cap < 1:
            problems.append("walk_cap must be at least 1")
        if self.recursion_budget < 1:
            problems.append("recursion_budget must be at least 1")
        return problems

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "t": self.t,
            "l": self.l,
            "k_gamma": self.k_gamma,
            "walk_cap": self.walk_cap,
            "k_z": self.k_z,
            "recursion_budget": self.recursion_budget,
            "asymptotic": self.asymptotic,
            "c_t": self.c_t,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "VimatchParams":
        assert isinstance(d, dict), "vimatch section must be an object"
        params = VimatchParams()
        for key in ("alpha", "t", "l", "k_gamma", "walk_cap", "k_z",
                    "recursion_budget", "c_t"):
            v = d.get(key)
            assert v is None or (
                isinstance(v, int) and not isinstance(v, bool)
            ), f"{key}: {v!r}"
            if v is not None:
                setattr(params, key, v)

        v = d.get("asymptotic")
        assert v is None or isinstance(v, bool), f"asymptotic: {v!r}"
        if v is not None:
            params.asymptotic = v
        return params


class ExperimentConfig:
    """
    Where the graph comes from and how many trials to run.
    """

    def __init__(self) -> None:
        self.graph: Optional[Path] = None
        self.generator: Optional[str] = "er:n=12,m=20,wmin=1,wmax=10"
        self.trials: int = 20
        self.eval_samples: int = 500
        self.independence_runs: int = 5000
        self.seed: int = 0
        self.output = Path("report.json")
        self.r_values: list[int] = [1, 4, 16, 64]
        self.lambda_hops: Optional[int] = None
        self.sampler_only: bool = False
        self.vary_graph: bool = False
        self.ratio_pilot: Optional[float] = None

    def problems(self) -> list[str]:
        problems: list[str] = []
        if self.graph is None and self.generator is None:
            problems.append("Either a graph file or a generator spec is required")
        if self.graph is not None and not self.graph.exists():
            problems.append(f"Graph file does not exist: {self.graph}")
        if self.graph is None and self.generator is not None:
            try:
                GeneratorSpec.parse(self.generator)
            except ParseError as e:
                problems.append(str(e))
        if self.trials < 1 or self.eval_samples < 1 or self.independence_runs < 1:
            problems.append("trials, eval_samples and independence_runs must be at least 1")
        if not 0 <= self.seed < 2**64:
            problems.append("seed must fit in 64 bits")
        if len(self.r_values) == 0 or min(self.r_values) < 1:
            problems.append("r_values must be a nonempty list of positive integers")
        if self.lambda_hops is not None and self.lambda_hops < 1:
            problems.append("lambda_hops must be at least 1")
        if self.ratio_pilot is not None and not 0 <= self.ratio_pilot <= 1:
            problems.append(f"ratio_pilot must lie in [0, 1]: {self.ratio_pilot}")
        return problems

    def load_graph(self, denominator: Optional[int] = None) -> WeightedGraph:
        """
        The experiment's base graph, read from disk or generated from the
        `GRAPH` stream of the root seed.
        """
        if self.graph is not None:
            return read_graph(self.graph, denominator)
        assert self.generator is not None
        return GeneratorSpec.parse(self.generator).build(
            RngStream(self.seed).for_purpose(Purpose.GRAPH)
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "graph": str(self.graph) if self.graph is not None else None,
            "generator": self.generator,
            "trials": self.trials,
            "eval_samples": self.eval_samples,
            "independence_runs": self.independence_runs,
            "seed": self.seed,
            "output": str(self.output),
            "r_values": list(self.r_values),
            "lambda_hops": self.lambda_hops,
            "sampler_only": self.sampler_only,
            "vary_graph": self.vary_graph,
            "ratio_pilot": self.ratio_pilot,
        }

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "ExperimentConfig":
        assert isinstance(d, dict), "experiment section must be an object"
        cfg = ExperimentConfig()

        v = d.get("graph")
        assert v is None or isinstance(v, str), f"graph: {v!r}"
        cfg.graph = Path(v) if v is not None else None

        v = d.get("generator")
        assert v is None or isinstance(v, str), f"generator: {v!r}"
        cfg.generator = v

        for key in ("trials", "eval_samples", "independence_runs", "seed"):
            v = d.get(key)
            assert v is None or isinstance(v, int), f"{key}: {v!r}"
            if v is not None:
                setattr(cfg, key, v)

        v = d.get("output")
        assert v is None or isinstance(v, str), f"output: {v!r}"
        if v is not None:
            cfg.output = Path(v)

        v = d.get("r_values")
        assert v is None or isinstance(v, list), f"r_values: {v!r}"
        if v is not None:
            for r in v:
                assert isinstance(r, int), f"r_values: {r!r}"
            cfg.r_values = v

        v = d.get("lambda_hops")
        assert v is None or isinstance(v, int), f"lambda_hops: {v!r}"
        cfg.lambda_hops = v

        for key in ("sampler_only", "vary_graph"):
            v = d.get(key)
            assert v is None or isinstance(v, bool), f"{key}: {v!r}"
            if v is not None:
                setattr(cfg, key, v)

        v = d.get("ratio_pilot")
        assert v is None or (
            isinstance(v, (int, float)) and not isinstance(v, bool)
        ), f"ratio_pilot: {v!r}"
        cfg.ratio_pilot = float(v) if v is not None else None

        return cfg


class State:
    def __init__(self) -> None:
        """
        Initializes a default configuration for an experiment run.
        """
        self.sparsifier = SparsifierConfig()
        self.vimatch = VimatchParams()
        self.experiment = ExperimentConfig()

    def load(self, path: Path) -> None:
        try:
            with open(path, "r") as f:
                c = json.load(f)
                assert isinstance(c, dict), "config must be an object"

                version = c.get("schema_version", SCHEMA_VERSION)
                assert version == SCHEMA_VERSION, f"schema_version: {version!r}"

                self.sparsifier = SparsifierConfig.from_dict(
                    c.get("sparsifier", {})
                )
                self.vimatch = VimatchParams.from_dict(c.get("vimatch", {}))
                self.experiment = ExperimentConfig.from_dict(
                    c.get("experiment", {})
                )

        except AssertionError as msg:
            print("Invalid value in config:", msg)
            _, _, tb = sys.exc_info()
            traceback.print_tb(tb)
            exit(1)
        except Exception as e:
            exc_type, _, exc_tb = sys.exc_info()
            print("Error loading config:", e)
            if exc_tb is not None:
                fname = os.path.split(exc_tb.tb_frame.f_code.co_filename)[1]
                print(exc_type, fname, exc_tb.tb_lineno)
            exit(1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "sparsifier": self.sparsifier.to_dict(),
            "vimatch": self.vimatch.to_dict(),
            "experiment": self.experiment.to_dict(),
        }

    def save(self, path: Path) -> None:
        """
        Saves the current config at the given path.
        """
        with open(path, "w") as f:
            f.write(json.dumps(self.to_dict(), indent=2))
        print(f"Configuration saved at: {path}")

    def problems(self) -> list[str]:
        return (
            self.sparsifier.problems()
            + self.vimatch.resolved(self.sparsifier.epsilon).problems()
            + self.experiment.problems()
        )

    def validate_or_exit(self) -> None:
        """
        Checks the current config for consistency, and if inconsistencies are
        found, exits the application.
        """
        problems = self.problems()
        if problems:
            for problem in problems:
                print(f"Invalid configuration: {problem}")
            exit(1)


def init_config(config_path: Path) -> None:
    """
    Initializes a default config file for the application.
    """
    config = State()
    print(f"Default graph generator: {config.experiment.generator}")
    config.save(config_path)


def load_config(config_path: Path) -> State:
    """
    Loads a config file from the given location.
    """
    config = State()
    config.load(config_path)
    return config
