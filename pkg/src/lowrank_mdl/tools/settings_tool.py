from pathlib import Path
from typing import Any, Dict, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError

from lowrank_mdl.errors import ConfigError
from lowrank_mdl.tools.bits_tool import CoderMode
from lowrank_mdl.tools.rpca_tool import SolverConfig


DEFAULTS_PATH = Path(__file__).parent.parent / "config" / "defaults.yaml"


# Sections de config/defaults.yaml
class ScheduleSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    count: PositiveInt = Field(30, description="nombre de valeurs de lambda sur le chemin")
    low: PositiveFloat = Field(0.05, description="plus petit lambda_E, en unités de 1/sqrt(max(m, n))")
    high: PositiveFloat = Field(4.0, description="plus grand lambda_E, en unités de 1/sqrt(max(m, n))")


class QuantizationSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    delta_sigma: PositiveFloat = Field(1e-16, description="précision des valeurs singulières")
    max_halvings: int = Field(40, ge=0, description="arrêt forcé de la boucle de division de delta_u / delta_v")
    rank_tol: float = Field(1e-12, ge=0.0, description="seuil relatif de la SVD du candidat")
    delta_e: Union[Literal["auto"], PositiveFloat] = Field("auto", description="pas de la grille des erreurs")


class CoderSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    u_mode: Literal["auto", "predictive", "spherical"] = "auto"
    v_mode: CoderMode = "predictive"
    family: Literal["rpca", "pca"] = "rpca"


class ExportSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    foreground_offset: int = Field(128, ge=0, le=255, description="ajouté à E avant l'écriture des images de premier plan")


class RuntimeSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    workers: PositiveInt = Field(1, description="threads évaluant les candidats résolus")


class Settings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    solver: SolverConfig = SolverConfig()
    schedule: ScheduleSettings = ScheduleSettings()
    quantization: QuantizationSettings = QuantizationSettings()
    coders: CoderSettings = CoderSettings()
    export: ExportSettings = ExportSettings()
    runtime: RuntimeSettings = RuntimeSettings()

    def with_overrides(self, overrides: Dict[str, Dict[str, Any]]) -> "Settings":
        """Copy with ``{section: {key: value}}`` applied; None values are ignored."""
        merged = self.model_dump()
        for section, values in overrides.items():
            merged[section].update({k: v for k, v in values.items() if v is not None})
        return _validate(merged, "command-line overrides")


def _deep_merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}")
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML in {path}: {e}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"configuration {path} must be a mapping of sections")
    return data


def _validate(data: Dict[str, Any], origin: str) -> Settings:
    try:
        return Settings.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration ({origin}): {e}")


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """Packaged defaults, with the user's YAML file (if any) merged on top."""
    data = _read_yaml(DEFAULTS_PATH)
    origin = str(DEFAULTS_PATH)
    if path is not None:
        data = _deep_merge(data, _read_yaml(Path(path)))
        origin = str(path)
    return _validate(data, origin)
