"""JSON schema of the analysis report written by the CLI.

The schema is strict (no undeclared keys) so downstream consumers can
rely on report.json staying shape-stable; the sensitivity sections are
present only when the run produced rankings.
"""

_PEAK = {
    "type": "object",
    "properties": {
        "freq_hz": {"type": "number", "exclusiveMinimum": 0},
        "magnitude_db": {"type": "number"},
        "phase_slope": {"enum": [-1, 1]},
    },
    "required": ["freq_hz", "magnitude_db", "phase_slope"],
    "additionalProperties": False,
}

_CROSSOVER = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["magnitude", "phase"]},
        "freq_hz": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind", "freq_hz"],
    "additionalProperties": False,
}

_CRITICAL_LOCUS = {
    "type": "object",
    "properties": {
        "index": {"type": "integer", "minimum": 1},
        "min_distance": {"type": "number", "minimum": 0},
        "range_hz": {
            "type": "array",
            "items": {"type": "number", "exclusiveMinimum": 0},
            "minItems": 2,
            "maxItems": 2,
        },
        "crossovers": {"type": "array", "items": _CROSSOVER},
    },
    "required": ["index", "min_distance", "range_hz", "crossovers"],
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "properties": {
        "verdict": {
            "type": "object",
            "properties": {
                "P": {"type": "integer", "minimum": 0},
                "N": {"type": "integer"},
                "stable": {"type": "boolean"},
                "windings": {"type": "array", "items": {"type": "integer"}},
                "peaks": {"type": "array", "items": _PEAK},
            },
            "required": ["P", "N", "stable", "windings", "peaks"],
            "additionalProperties": False,
        },
        "critical_loci": {"type": "array", "items": _CRITICAL_LOCUS},
        "port_ranking": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "port": {"type": "integer", "minimum": 1},
                    "station": {"type": "string"},
                    "score": {"type": "number", "minimum": 0},
                },
                "required": ["port", "station", "score"],
                "additionalProperties": False,
            },
        },
        "station_ranking": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "station": {"type": "string"},
                    "pole": {"enum": ["positive", "negative", "both"]},
                    "score": {"type": "number", "minimum": 0},
                },
                "required": ["station", "pole", "score"],
                "additionalProperties": False,
            },
        },
        "provenance": {
            "type": "object",
            "properties": {
                "inputs": {
                    "type": "object",
                    "additionalProperties": {"type": "string"},
                },
                "options": {"type": "object"},
                "version": {"type": "string"},
                "timestamp": {"type": "string"},
            },
            "required": ["inputs", "options", "version", "timestamp"],
            "additionalProperties": False,
        },
    },
    "required": ["verdict", "critical_loci", "provenance"],
    "additionalProperties": False,
}
