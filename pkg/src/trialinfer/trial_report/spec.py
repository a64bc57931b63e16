"""Trial specification files: JSON documents with a versioned schema.

Structural problems are collected from a JSON Schema pass and semantic
problems (graph invariants, unresolved ids, gate cycles) from a second pass;
both are reported together.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import jsonschema

from ..graph_mcp import MCPGraph, validate_graph
from ..gsd import DesignError, GroupSequentialDesign, SpendingFunction
from ..normal_core import EndpointScale, SummaryStat, events_to_information, summary_from_ci

SCHEMA_VERSION = 1

_SUMMARY = {
    "type": "object",
    "oneOf": [
        {"required": ["estimate", "ci"], "not": {"anyOf": [{"required": ["se"]}, {"required": ["z"]}]}},
        {"required": ["estimate", "se"], "not": {"anyOf": [{"required": ["ci"]}, {"required": ["z"]}]}},
        {"required": ["z", "information"], "not": {"anyOf": [{"required": ["ci"]}, {"required": ["se"]}, {"required": ["estimate"]}]}},
    ],
    "properties": {
        "estimate": {"type": "number"},
        "ci": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "se": {"type": "number", "exclusiveMinimum": 0},
        "z": {"type": "number"},
        "information": {"type": "number", "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

_GRAPH = {
    "type": "object",
    "required": ["weights", "transitions"],
    "properties": {
        "hypotheses": {"type": "array", "items": {"type": "string"}},
        "weights": {"type": "array", "items": {"type": "number"}},
        "transitions": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "additionalProperties": False,
}

SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "trialinfer trial specification",
    "type": "object",
    "required": ["schema_version", "endpoints"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "title": {"type": "string"},
        "endpoints": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "scale"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "label": {"type": "string"},
                    "section": {"type": "string"},
                    "scale": {
                        "type": "object",
                        "required": ["kind", "benefit_direction"],
                        "properties": {
                            "kind": {"enum": ["mean_difference", "log_hazard_ratio"]},
                            "benefit_direction": {"enum": ["lower_is_better", "higher_is_better"]},
                        },
                        "additionalProperties": False,
                    },
                    "summary": _SUMMARY,
                    "available": {"type": "boolean"},
                },
                "additionalProperties": False,
            },
        },
        "mcp": {
            "type": "object",
            "required": ["alpha_one_sided", "benefit_graph"],
            "properties": {
                "alpha_one_sided": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
                "hypotheses": {"type": "array", "items": {"type": "string"}},
                "benefit_graph": _GRAPH,
                "harm_graph": _GRAPH,
                "terminal_weights": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "harm_p_values": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0, "maximum": 1}},
            },
            "additionalProperties": False,
        },
        "gsd_endpoints": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["endpoint", "design", "observations"],
                "properties": {
                    "endpoint": {"type": "string"},
                    "gate_on": {"type": ["string", "null"]},
                    "design": {
                        "type": "object",
                        "required": ["info_fractions"],
                        "properties": {
                            "info_fractions": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                            "alpha_one_sided": {"type": "number"},
                            "spending": {
                                "type": "object",
                                "required": ["kind"],
                                "properties": {
                                    "kind": {"enum": ["obrien_fleming_type", "pocock_type", "user_table"]},
                                    "table": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
                                },
                                "additionalProperties": False,
                            },
                            "harm_boundary": {"enum": ["none", "symmetric"]},
                            "max_information": {"type": "number", "exclusiveMinimum": 0},
                            "max_events": {"type": "integer", "minimum": 1},
                            "allocation_ratio": {"type": "number", "exclusiveMinimum": 0},
                        },
                        "additionalProperties": False,
                    },
                    "observations": {
                        "type": "array",
                        "minItems": 1,
                        "items": {
                            "type": "object",
                            "required": ["look", "summary"],
                            "properties": {
                                "look": {"type": "integer", "minimum": 1},
                                "summary": _SUMMARY,
                                "information": {"type": "number", "exclusiveMinimum": 0},
                                "events": {"type": "integer", "minimum": 1},
                            },
                            "additionalProperties": False,
                        },
                    },
                },
                "additionalProperties": False,
            },
        },
        "simulation": {
            "type": "object",
            "properties": {
                "seed": {"type": "integer", "minimum": 0, "maximum": 18446744073709551615},
                "replications": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "output": {
            "type": "object",
            "properties": {
                "formats": {"type": "array", "items": {"enum": ["text", "csv", "json"]}},
                "digits": {"type": "integer", "minimum": 0, "maximum": 10},
                "p_digits": {"type": "integer", "minimum": 1, "maximum": 10},
                "level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class SpecParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line, self.column = line, column


class SpecValidationError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid trial spec:\n  " + "\n  ".join(self.errors))


@dataclass
class Endpoint:
    id: str
    label: str
    scale: EndpointScale
    section: str = ""
    summary: Optional[SummaryStat] = None
    available: bool = True


@dataclass
class MCPSpec:
    alpha_one_sided: float
    benefit: MCPGraph
    harm: Optional[MCPGraph] = None
    terminal_weights: Optional[list] = None
    harm_p_values: dict = field(default_factory=dict)


@dataclass
class Observation:
    look: int
    summary: SummaryStat
    information: Optional[float] = None


@dataclass
class GSDEndpoint:
    endpoint: str
    design: GroupSequentialDesign
    observations: list
    gate_on: Optional[str] = None

    @property
    def latest(self) -> Observation:
        return max(self.observations, key=lambda o: o.look)


@dataclass
class OutputSpec:
    formats: tuple = ("text",)
    digits: int = 2
    p_digits: int = 3
    level: float = 0.95


@dataclass
class TrialSpec:
    title: str
    endpoints: dict
    mcp: Optional[MCPSpec] = None
    gsd_endpoints: list = field(default_factory=list)
    seed: Optional[int] = None
    replications: Optional[int] = None
    output: OutputSpec = field(default_factory=OutputSpec)

    def endpoint(self, eid: str) -> Endpoint:
        return self.endpoints[eid]


def _summary(raw: dict, scale: EndpointScale) -> SummaryStat:
    if "ci" in raw:
        lo, hi = raw["ci"]
        return summary_from_ci(raw["estimate"], lo, hi, raw.get("level", 0.95), scale)
    if "se" in raw:
        return SummaryStat(scale.to_analysis(raw["estimate"]), raw["se"], scale)
    se = 1.0 / raw["information"] ** 0.5
    return SummaryStat(scale.benefit_sign * raw["z"] * se, se, scale)


def _graph(raw: dict, hypotheses: list) -> MCPGraph:
    return MCPGraph(raw.get("hypotheses", hypotheses), raw["weights"], raw["transitions"])


def _gate_cycles(gates: dict) -> list[str]:
    errors = []
    for start in gates:
        seen, cur = {start}, gates.get(start)
        while cur is not None:
            if cur in seen:
                errors.append(f"gate_on chain starting at {start!r} is cyclic")
                break
            seen.add(cur)
            cur = gates.get(cur)
    return errors


def parse_spec(doc: dict) -> TrialSpec:
    """Validate a decoded spec document and build a :class:`TrialSpec`."""
    validator = jsonschema.Draft202012Validator(SPEC_SCHEMA)
    errors = [f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}"
              for e in sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))]
    if errors:
        raise SpecValidationError(errors)

    endpoints: dict = {}
    for raw in doc["endpoints"]:
        eid = raw["id"]
        if eid in endpoints:
            errors.append(f"endpoints: duplicate id {eid!r}")
            continue
        scale = EndpointScale(raw["scale"]["kind"], raw["scale"]["benefit_direction"])
        ep = Endpoint(eid, raw.get("label", eid), scale, raw.get("section", ""),
                      available=raw.get("available", True))
        if "summary" in raw:
            try:
                ep.summary = _summary(raw["summary"], scale)
            except ValueError as exc:
                errors.append(f"endpoints/{eid}/summary: {exc}")
        endpoints[eid] = ep

    mcp = None
    if "mcp" in doc:
        m = doc["mcp"]
        hyps = m.get("hypotheses") or m["benefit_graph"].get("hypotheses") or []
        if not hyps:
            errors.append("mcp: hypotheses must be listed (mcp.hypotheses or benefit_graph.hypotheses)")
        benefit = _graph(m["benefit_graph"], hyps)
        harm = _graph(m["harm_graph"], hyps) if "harm_graph" in m else None
        for name, g in (("benefit_graph", benefit), ("harm_graph", harm)):
            if g is None:
                continue
            errors += [f"mcp/{name}: {v}" for v in validate_graph(g)]
            for h in g.hypotheses:
                if h not in endpoints:
                    errors.append(f"mcp/{name}: hypothesis {h!r} does not resolve to an endpoint")
                elif endpoints[h].available and endpoints[h].summary is None:
                    errors.append(f"mcp/{name}: endpoint {h!r} has no summary and is not marked unavailable")
        if harm is not None and set(harm.hypotheses) != set(benefit.hypotheses):
            errors.append("mcp/harm_graph: hypothesis set differs from benefit_graph")
        tw = m.get("terminal_weights")
        if tw is not None and (len(tw) != benefit.size or sum(tw) > 1 + 1e-12):
            errors.append("mcp/terminal_weights: need one weight per hypothesis with sum ≤ 1")
        for h in m.get("harm_p_values", {}):
            if h not in benefit.hypotheses:
                errors.append(f"mcp/harm_p_values: unknown hypothesis {h!r}")
        mcp = MCPSpec(m["alpha_one_sided"], benefit, harm, tw, dict(m.get("harm_p_values", {})))

    gsd_eps = []
    gates = {}
    for i, raw in enumerate(doc.get("gsd_endpoints", [])):
        eid = raw["endpoint"]
        where = f"gsd_endpoints/{i} ({eid})"
        if eid not in endpoints:
            errors.append(f"{where}: endpoint does not resolve")
            continue
        scale = endpoints[eid].scale
        dr = raw["design"]
        max_info = dr.get("max_information")
        if max_info is None and "max_events" in dr:
            max_info = events_to_information(dr["max_events"], dr.get("allocation_ratio", 1.0))
        try:
            spending = SpendingFunction(dr.get("spending", {}).get("kind", "obrien_fleming_type"),
                                        tuple(map(tuple, dr.get("spending", {}).get("table", []))))
            design = GroupSequentialDesign(tuple(dr["info_fractions"]), dr.get("alpha_one_sided", 0.025),
                                           spending, dr.get("harm_boundary", "none"), max_info)
        except DesignError as exc:
            errors.append(f"{where}/design: {exc}")
            continue
        obs = []
        for o in raw["observations"]:
            if o["look"] > design.looks:
                errors.append(f"{where}: observation look {o['look']} exceeds the {design.looks} design looks")
                continue
            try:
                s = _summary(o["summary"], scale)
            except ValueError as exc:
                errors.append(f"{where}/observations: {exc}")
                continue
            info = o.get("information")
            if info is None and "events" in o:
                info = events_to_information(o["events"], dr.get("allocation_ratio", 1.0))
            if info is None and "z" in o["summary"]:
                info = o["summary"]["information"]
            obs.append(Observation(o["look"], s, info))
        gate = raw.get("gate_on")
        gates[eid] = gate
        gsd_eps.append(GSDEndpoint(eid, design, obs, gate))
    ids = {g.endpoint for g in gsd_eps}
    for eid, gate in gates.items():
        if gate is not None and gate not in ids:
            errors.append(f"gsd_endpoints ({eid}): gate_on {gate!r} is not a group-sequential endpoint")
    errors += _gate_cycles(gates)

    if errors:
        raise SpecValidationError(errors)

    sim = doc.get("simulation", {})
    out = doc.get("output", {})
    return TrialSpec(
        title=doc.get("title", ""),
        endpoints=endpoints,
        mcp=mcp,
        gsd_endpoints=gsd_eps,
        seed=sim.get("seed"),
        replications=sim.get("replications"),
        output=OutputSpec(tuple(out.get("formats", ["text"])), out.get("digits", 2),
                          out.get("p_digits", 3), out.get("level", 0.95)),
    )


def loads_spec(text: str) -> TrialSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(exc.msg, exc.lineno, exc.colno) from None
    return parse_spec(doc)


def load_spec(path) -> TrialSpec:
    return loads_spec(Path(path).read_text(encoding="utf-8"))
