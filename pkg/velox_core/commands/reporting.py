# FILE: velox_core/commands/reporting.py

"""Tablas CSV con unidades SI en la cabecera y documentos JSON de salida."""
import json
import os
from typing import Any, Dict, Iterable, Optional

import numpy as np
import pandas as pd

from ..oracle.forward_backward import OracleProfile
from ..planner.sqp import PlanResult
from ..simulation.state import RaceReport

PROFILE_COLUMNS = {
    's_glo': 's_glo[m]',
    't': 't[s]',
    'v': 'v[m/s]',
    'ax': 'ax[m/s2]',
    'ay': 'ay[m/s2]',
    'F': 'F[N]',
    'P': 'P[W]',
    'eps': 'eps[%]',
}


def ensure_out_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return str(value)


def write_json(document: Dict[str, Any], path: str):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, default=_json_default, ensure_ascii=False)


def write_jsonl(rows: Iterable[Dict[str, Any]], path: str):
    with open(path, 'w', encoding='utf-8') as f:
        for row in rows:
            f.write(json.dumps(row, default=_json_default, ensure_ascii=False) + "\n")


def write_csv(frame: pd.DataFrame, path: str):
    frame.to_csv(path, index=False, float_format='%.10g', na_rep='')


def _pad(segment_values: np.ndarray) -> np.ndarray:
    # Magnitudes por tramo (M−1) en una tabla por punto: la última fila queda vacía
    return np.append(np.asarray(segment_values, dtype=float), np.nan)


def plan_to_frame(plan: PlanResult, slack_group: int) -> pd.DataFrame:
    M = plan.v.size
    groups = np.minimum(np.arange(M - 1) // slack_group, plan.eps.size - 1)
    s_glo = plan.s_glo if plan.s_glo is not None else plan.origin_glo + plan.s_m
    frame = pd.DataFrame({
        's_m[m]': plan.s_m,
        PROFILE_COLUMNS['s_glo']: s_glo,
        PROFILE_COLUMNS['t']: plan.t,
        PROFILE_COLUMNS['v']: plan.v,
        PROFILE_COLUMNS['ax']: _pad(plan.a_x),
        PROFILE_COLUMNS['ay']: plan.a_y,
        PROFILE_COLUMNS['F']: _pad(plan.F_x),
        PROFILE_COLUMNS['P']: _pad(plan.P),
        PROFILE_COLUMNS['eps']: _pad(plan.eps[groups]),
    })
    return frame


def race_to_frame(report: RaceReport) -> pd.DataFrame:
    """Una fila por trozo recorrido; las ocho columnas del perfil van primero."""
    rows = [piece.model_dump() for piece in report.profile]
    frame = pd.DataFrame(rows, columns=['s_glo', 't', 'v', 'ax', 'ay', 'F', 'P', 'eps', 's_total', 'ds', 'cycle', 'mode'])
    return frame.rename(columns={**PROFILE_COLUMNS, 's_total': 's_total[m]', 'ds': 'ds[m]'})


def oracle_to_frame(oracle: OracleProfile, plan_v: np.ndarray, s_glo: Optional[np.ndarray] = None) -> pd.DataFrame:
    rel = np.abs(np.asarray(plan_v) - oracle.v) / np.maximum(oracle.v, 1.0)
    return pd.DataFrame({
        's_m[m]': oracle.s_m,
        PROFILE_COLUMNS['s_glo']: s_glo if s_glo is not None else oracle.s_m,
        'v_oracle[m/s]': oracle.v,
        'v_plan[m/s]': plan_v,
        'v_cap[m/s]': oracle.v_cap,
        'rel_dev[-]': rel,
        'limiting': [tag.value for tag in oracle.limiting],
    })
