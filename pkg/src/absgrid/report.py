"""JSON run reports and aggregate benchmark tables."""
from __future__ import annotations

import json
import statistics
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema

from .cegar import CegarOutcome, LoopOptions, Strategy


@dataclass
class RunReport:
    instance: dict
    strategy: dict
    options: dict
    steps: list[dict] = field(default_factory=list)
    outcome: dict = field(default_factory=dict)

    @classmethod
    def from_outcome(cls, outcome: CegarOutcome, instance: dict, strategy: Strategy,
                     opts: LoopOptions) -> "RunReport":
        witness = None
        if outcome.witness is not None:
            witness = sorted(str(a) for a in outcome.witness)
        return cls(instance=dict(instance),
                   strategy={"kind": strategy.kind, "debug_timeout_ms": strategy.debug_timeout_ms},
                   options={k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(opts).items()},
                   steps=[asdict(r) for r in outcome.step_log],
                   outcome={"status": outcome.status, "final_cost": outcome.cost,
                            "total_steps": outcome.steps, "wall_ms": round(outcome.wall_ms, 3),
                            "final_mapping": outcome.final_mapping.to_json(), "witness": witness})

    def to_json(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunReport":
        data = json.loads(text)
        validate_report(data)
        return cls(**data)


def report_schema() -> dict:
    return json.loads(resources.files("absgrid.schemas").joinpath("run_report.schema.json").read_text())


def validate_report(data: dict) -> None:
    """Raise ``jsonschema.ValidationError`` unless ``data`` is a well-formed report."""
    jsonschema.validate(data, report_schema())
    steps = data["steps"]
    refinements = sum(1 for s in steps if s.get("split"))
    if refinements != data["outcome"]["total_steps"]:
        raise jsonschema.ValidationError("total_steps differs from the number of refinements")
    costs = [s["cost"] for s in steps]
    if any(b <= a for a, b in zip(costs, costs[1:])):
        raise jsonschema.ValidationError("costs do not strictly increase across steps")


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean and minimum of steps and cost per (problem, n, strategy).

    ``rows`` carry ``problem``, ``n``, ``strategy``, ``status``, ``steps``,
    ``cost`` and ``wall_ms``; ``best_cost`` is the lowest cost among runs that
    ended ``abstract_unsat``.
    """
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["problem"], r["n"], r["strategy"]), []).append(r)
    out = []
    for (problem, n, strategy), rs in sorted(groups.items()):
        unsat = [r["cost"] for r in rs if r["status"] == "abstract_unsat"]
        out.append({"problem": problem, "n": n, "strategy": strategy, "runs": len(rs),
                    "unsat_runs": len(unsat),
                    "mean_steps": statistics.fmean(r["steps"] for r in rs),
                    "min_steps": min(r["steps"] for r in rs),
                    "mean_cost": statistics.fmean(r["cost"] for r in rs),
                    "min_cost": min(r["cost"] for r in rs),
                    "best_cost": min(unsat) if unsat else None,
                    "mean_wall_ms": statistics.fmean(r["wall_ms"] for r in rs)})
    return out


def format_table(agg: list[dict]) -> str:
    head = ["problem", "n", "strategy", "runs", "unsat", "steps(avg)", "steps(min)",
            "cost(avg)", "cost(min)", "cost(best)", "ms(avg)"]
    lines = ["\t".join(head)]
    for a in agg:
        best = "-" if a["best_cost"] is None else f"{a['best_cost']:.4f}"
        lines.append("\t".join([a["problem"], str(a["n"]), a["strategy"], str(a["runs"]),
                                str(a["unsat_runs"]), f"{a['mean_steps']:.2f}", str(a["min_steps"]),
                                f"{a['mean_cost']:.4f}", f"{a['min_cost']:.4f}", best,
                                f"{a['mean_wall_ms']:.0f}"]))
    return "\n".join(lines) + "\n"
