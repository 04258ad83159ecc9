import json
import logging
import math
from pathlib import Path

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from pydantic import ValidationError

from channel_model import Basis, Intensity, Link, ObservedCounts
from errors import QDSError
from finite_key import BUDGET_USES
from optimizer import ParameterPoint, evaluate
from security import assess, min_signature_length, signature_time_and_rate
from settings import QDSConfig

logger = logging.getLogger(__name__)

app = FastAPI()

# CORS (browser notebooks and dashboards call this directly)
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

CONTEXT_FILE = Path(__file__).with_name("context.json")


def _error_text(exc):
    if isinstance(exc, ValidationError):
        first = exc.errors()[0]
        return f"{'.'.join(str(p) for p in first['loc'])}: {first['msg']}"
    return str(exc)


def json_safe(value):
    """inf and nan are not valid JSON; report them as null."""
    if isinstance(value, dict):
        return {k: json_safe(v) for k, v in value.items()}
    if isinstance(value, list):
        return [json_safe(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def counts_from_rows(rows):
    """[{link, basis, intensity, n, m}, ...] -> {Link: ObservedCounts}"""
    cells = {link: {} for link in Link}
    for row in rows:
        link = Link(row["link"])
        cells[link][(Basis(row["basis"]), Intensity(row["intensity"]))] = (row["n"], row["m"])
    for link, link_cells in cells.items():
        if len(link_cells) != 4:
            raise ValueError(f"link {link.value} needs 4 basis/intensity rows, got {len(link_cells)}")
    return {link: ObservedCounts.from_cells(link_cells) for link, link_cells in cells.items()}


@app.post("/v1/context")
async def context():
    with open(CONTEXT_FILE) as f:
        context = json.load(f)
    context["budget_uses"] = list(BUDGET_USES)
    context["default_config"] = QDSConfig().model_dump()
    return context


@app.post("/v1/estimate")
async def estimate(body: dict):
    try:
        if not body.get("counts"):
            return {"error": "No counts provided"}
        cfg = QDSConfig(**body.get("config", {}))
        n_pulses = int(body.get("n_pulses") or cfg.n_pulses)
        pc = cfg.pulse_config(n_pulses=n_pulses)
        ch = cfg.channel(body.get("distance_km"))
        params = cfg.security()
        counts = counts_from_rows(body["counts"])
        L = body.get("block_length") or min_signature_length(counts, pc, params)
        report = assess(counts, pc, params, int(L), quiet=True)
        report.with_timing(signature_time_and_rate(int(L), counts, pc, ch))
        return json_safe(report.to_dict())
    except (QDSError, ValueError, KeyError) as e:
        return {"error": f"Estimation error: {_error_text(e)}"}
    except Exception as e:
        logger.exception("estimate failed")
        return {"error": f"Server error: {str(e)}"}


@app.post("/v1/evaluate")
async def evaluate_point(body: dict):
    try:
        cfg = QDSConfig(**body.get("config", {}))
        point = ParameterPoint(cfg.mu, cfg.nu, cfg.p_mu, cfg.p_z_tx, cfg.p_z_rx)
        result = evaluate(point, cfg.channel(body.get("distance_km")), cfg.security(), cfg.n_pulses)
        return {
            "point": point.as_dict(),
            "rate": result.rate,
            "L": result.L,
            "p_sec": json_safe(result.p_sec),
            "feasible": result.feasible,
            "reason": result.reason,
        }
    except (QDSError, ValueError) as e:
        return {"error": f"Evaluation error: {_error_text(e)}"}
    except Exception as e:
        logger.exception("evaluate failed")
        return {"error": f"Server error: {str(e)}"}
