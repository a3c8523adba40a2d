"""One-call pipeline: load a table, select features around the target,
discover structure among the selected variables, and export everything.

Stages run in a fixed order — load, select, discover, claims, export —
and any failure aborts with the stage name attached.  All file output
happens in the export stage, so an aborted run leaves no partial files.
The JSON and DOT outputs are deterministic functions of the
configuration; wall-clock timings go to the run log only.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .claims import Claim, claims_to_json_dict, edges_to_claims
from .featsel import mi_select, mmmb
from .graphs import MixedGraph, to_dot
from .search import PcOptions, SearchResult, fci, fges, ges, pc, pc_on_skeleton
from .tabular import DataTable, load_csv

logger = logging.getLogger(__name__)

__all__ = [
    "OUTPUT_DIR_ENV",
    "PipelineConfig",
    "PipelineError",
    "RunReport",
    "run_pipeline",
]

OUTPUT_DIR_ENV = "CAUSALOMICS_OUT"

_SELECTION_METHODS = {"mi", "mmmb"}
_ALGORITHMS = {"pc", "fci", "ges", "fges", "pc_on_skeleton"}
_TESTS = {"auto", "chi_square", "cg_lrt", "rcit"}
_SCORES = {"auto", "discrete_bic", "bdeu", "cg_bic"}
_TEST_ALGORITHMS = {"pc", "fci", "pc_on_skeleton"}

_SELECTION_KEYS = {
    "mi": {"method", "k"},
    "mmmb": {"method", "alpha", "test"},
}
_ALGORITHM_KEYS = {
    "pc": {"name", "test", "alpha"},
    "fci": {"name", "test", "alpha"},
    "pc_on_skeleton": {"name", "test", "alpha", "skeleton"},
    "ges": {"name", "score"},
    "fges": {"name", "score", "parallelism"},
}


class PipelineError(ValueError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: str):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, "out")


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one run needs; validated before any work starts."""

    dataset: str
    target: str
    selection_method: str = "mmmb"
    selection_k: int | None = None
    selection_alpha: float = 0.05
    selection_test: str = "auto"
    algorithm: str = "pc"
    test: str = "auto"
    score: str = "auto"
    alpha: float = 0.05
    parallelism: int = 1
    skeleton: str | None = None
    seed: int = 0
    output_dir: str = field(default_factory=_default_output_dir)

    def validate(self) -> None:
        if not self.dataset:
            raise PipelineError("config", "dataset path is required")
        if not self.target:
            raise PipelineError("config", "target name is required")
        if self.selection_method not in _SELECTION_METHODS:
            raise PipelineError(
                "config", f"unknown selection method "
                f"{self.selection_method!r}; choose from "
                f"{sorted(_SELECTION_METHODS)}")
        if self.selection_method == "mi":
            if self.selection_k is None or self.selection_k < 1:
                raise PipelineError(
                    "config", "mi selection needs k >= 1")
        else:
            if not 0.0 < self.selection_alpha < 1.0:
                raise PipelineError(
                    "config", "mmmb selection needs alpha in (0, 1)")
            if self.selection_test not in _TESTS:
                raise PipelineError(
                    "config", f"unknown selection test "
                    f"{self.selection_test!r}")
        if self.algorithm not in _ALGORITHMS:
            raise PipelineError(
                "config", f"unknown algorithm {self.algorithm!r}; choose "
                f"from {sorted(_ALGORITHMS)}")
        if self.algorithm in _TEST_ALGORITHMS:
            if self.test not in _TESTS:
                raise PipelineError(
                    "config", f"unknown test {self.test!r} for "
                    f"{self.algorithm}")
            if not 0.0 < self.alpha < 1.0:
                raise PipelineError("config", "alpha must be in (0, 1)")
        else:
            if self.score not in _SCORES:
                raise PipelineError(
                    "config", f"unknown score {self.score!r} for "
                    f"{self.algorithm}")
        if self.algorithm == "pc_on_skeleton" and not self.skeleton:
            raise PipelineError(
                "config", "pc_on_skeleton needs a skeleton graph file")
        if self.algorithm == "fges" and self.parallelism < 1:
            raise PipelineError("config", "parallelism must be >= 1")

    def to_json_dict(self) -> dict:
        if self.selection_method == "mi":
            selection = {"method": "mi", "k": self.selection_k}
        else:
            selection = {"method": "mmmb", "alpha": self.selection_alpha,
                         "test": self.selection_test}
        algorithm: dict = {"name": self.algorithm}
        if self.algorithm in _TEST_ALGORITHMS:
            algorithm["test"] = self.test
            algorithm["alpha"] = self.alpha
            if self.algorithm == "pc_on_skeleton":
                algorithm["skeleton"] = self.skeleton
        else:
            algorithm["score"] = self.score
            if self.algorithm == "fges":
                algorithm["parallelism"] = self.parallelism
        return {
            "dataset": self.dataset,
            "target": self.target,
            "selection": selection,
            "algorithm": algorithm,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "PipelineConfig":
        known = {"dataset", "target", "selection", "algorithm", "seed",
                 "output_dir"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise PipelineError("config", f"unknown config keys {unknown}")
        kwargs: dict = {
            "dataset": data.get("dataset", ""),
            "target": data.get("target", ""),
        }
        selection = dict(data.get("selection", {"method": "mmmb"}))
        method = selection.get("method")
        if method not in _SELECTION_METHODS:
            raise PipelineError(
                "config", f"unknown selection method {method!r}")
        allowed = _SELECTION_KEYS[method]
        extra = sorted(set(selection) - allowed)
        if extra:
            raise PipelineError(
                "config", f"selection keys {extra} not valid for {method}")
        kwargs["selection_method"] = method
        if method == "mi":
            kwargs["selection_k"] = selection.get("k")
        else:
            kwargs["selection_alpha"] = selection.get("alpha", 0.05)
            kwargs["selection_test"] = selection.get("test", "auto")
        algorithm = dict(data.get("algorithm", {"name": "pc"}))
        name = algorithm.get("name")
        if name not in _ALGORITHMS:
            raise PipelineError("config", f"unknown algorithm {name!r}")
        allowed = _ALGORITHM_KEYS[name]
        extra = sorted(set(algorithm) - allowed)
        if extra:
            raise PipelineError(
                "config", f"algorithm keys {extra} not valid for {name}")
        kwargs["algorithm"] = name
        if name in _TEST_ALGORITHMS:
            kwargs["test"] = algorithm.get("test", "auto")
            kwargs["alpha"] = algorithm.get("alpha", 0.05)
            kwargs["skeleton"] = algorithm.get("skeleton")
        else:
            kwargs["score"] = algorithm.get("score", "auto")
            kwargs["parallelism"] = algorithm.get("parallelism", 1)
        if "seed" in data:
            kwargs["seed"] = data["seed"]
        if "output_dir" in data:
            kwargs["output_dir"] = data["output_dir"]
        config = cls(**kwargs)
        config.validate()
        return config


@dataclass
class RunReport:
    """What a pipeline run produced: the selection, the search result,
    the claims, the files written, and how long each stage took."""

    config: PipelineConfig
    selection: dict
    result: SearchResult
    claims: list[Claim]
    manifest: list[str]
    stage_seconds: dict[str, float]
    wall_time_s: float

    def to_json_dict(self) -> dict:
        """Deterministic report body; timings stay out (see run.log)."""
        graph = self.result.graph
        tests_run = sum(1 for entry in self.result.log
                        if entry.get("event") == "test")
        return {
            "config": self.config.to_json_dict(),
            "selection": self.selection,
            "search": {
                "algorithm": self.result.params.get("algorithm"),
                "params": dict(self.result.params),
                "n_nodes": len(graph.nodes),
                "n_edges": sum(1 for _ in graph.edges()),
                "tests_run": tests_run,
                "score_total": self.result.score_total,
            },
            "claims": [c.id for c in self.claims],
            "manifest": list(self.manifest),
        }


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _subset_table(table: DataTable, keep: list[str]) -> DataTable:
    wanted = [n for n in table.names if n in set(keep)]
    metas = [table.meta(n) for n in wanted]
    columns = [table.column(n) for n in wanted]
    return DataTable(metas, columns, n_dropped=table.n_dropped)


def _run_selection(config: PipelineConfig, table: DataTable) -> dict:
    if config.selection_method == "mi":
        ranked = mi_select(table, config.target, config.selection_k,
                           seed=config.seed)
        return ranked.to_json_dict()
    blanket = mmmb(table, config.target, test=config.selection_test,
                   alpha=config.selection_alpha)
    return blanket.to_json_dict()


def _run_search(config: PipelineConfig, table: DataTable,
                skeleton: MixedGraph | None) -> SearchResult:
    if config.algorithm in _TEST_ALGORITHMS:
        opts = PcOptions(alpha=config.alpha, test=config.test)
        if config.algorithm == "pc":
            return pc(table, opts=opts)
        if config.algorithm == "fci":
            return fci(table, opts=opts)
        return pc_on_skeleton(skeleton, table, opts=opts)
    if config.algorithm == "ges":
        return ges(table, score=config.score)
    return fges(table, score=config.score, parallelism=config.parallelism)


def run_pipeline(config: PipelineConfig) -> RunReport:
    """Execute load → select → discover → claims → export."""
    config.validate()
    stage_seconds: dict[str, float] = {}
    started = time.perf_counter()

    def timed(stage: str, fn):
        t0 = time.perf_counter()
        try:
            value = fn()
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(stage, str(exc)) from exc
        stage_seconds[stage] = time.perf_counter() - t0
        return value

    def load():
        table = load_csv(config.dataset, config.target)
        if config.target not in table.names:
            raise ValueError(
                f"target {config.target!r} not in {config.dataset}")
        skeleton = None
        if config.algorithm == "pc_on_skeleton":
            with open(config.skeleton, encoding="utf-8") as fh:
                skeleton = MixedGraph.from_json_dict(json.load(fh))
        return table, skeleton

    table, skeleton = timed("load", load)
    selection = timed("select", lambda: _run_selection(config, table))
    subset = _subset_table(table, selection["selected"])
    result = timed("discover", lambda: _run_search(config, subset, skeleton))

    def build_claims():
        provenance = {
            "algorithm": config.algorithm,
            "test_or_score": result.params.get(
                "test", result.params.get("score")),
            "alpha": config.alpha
            if config.algorithm in _TEST_ALGORITHMS else None,
            "graph_file": "graph.json",
        }
        return edges_to_claims(result.graph, config.target,
                               list(subset.metas), provenance)

    claims = timed("claims", build_claims)

    manifest = ["selection.json", "graph.json", "graph.dot", "claims.json",
                "report.json", "run.log"]
    report = RunReport(config=config, selection=selection, result=result,
                       claims=claims, manifest=manifest,
                       stage_seconds=stage_seconds, wall_time_s=0.0)

    def export():
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []
        try:
            def emit(name: str, text: str):
                path = out / name
                path.write_text(text, encoding="utf-8")
                written.append(path)

            emit("selection.json", _json_text(selection))
            emit("graph.json", _json_text(result.to_json_dict()))
            emit("graph.dot", to_dot(result.graph) + "\n")
            emit("claims.json", _json_text(claims_to_json_dict(claims)))
            emit("report.json", _json_text(report.to_json_dict()))
            wall = time.perf_counter() - started
            lines = [f"stage {name}: {seconds:.3f}s"
                     for name, seconds in stage_seconds.items()]
            lines.append(
                "tests run: "
                f"{report.to_json_dict()['search']['tests_run']}")
            lines.append(f"total wall time: {wall:.3f}s")
            emit("run.log", "\n".join(lines) + "\n")
            return wall
        except Exception:
            for path in written:
                path.unlink(missing_ok=True)
            raise

    report.wall_time_s = timed("export", export)
    logger.info("pipeline wrote %d files to %s", len(manifest),
                config.output_dir)
    return report
