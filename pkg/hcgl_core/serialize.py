"""
HCGL Core Serialization - Canonical CBOR hashing and rounded JSON emission.

Floats are normalized to 12 significant digits before hashing or writing, so
a bundle's fingerprint does not depend on the last bits of a platform's libm.
"""

import hashlib
import json
import math
from datetime import datetime
from typing import Any

import cbor2
from pydantic import BaseModel

SIGNIFICANT_DIGITS = 12


def round_significant(value: float, digits: int = SIGNIFICANT_DIGITS) -> float:
    if value == 0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits - 1}e}")


def normalize_value(value: Any) -> Any:
    """
    Recursively prepare a dumped model for hashing or JSON output.

    - floats are rounded to 12 significant digits
    - datetimes become ISO 8601 strings without microseconds
    - tuples become lists
    """
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return round_significant(value)
    if isinstance(value, datetime):
        return value.replace(microsecond=0).isoformat()
    if isinstance(value, dict):
        return {k: normalize_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [normalize_value(item) for item in value]
    return value


def _cbor_default_encoder(encoder, value: Any) -> None:
    if isinstance(value, datetime):
        encoder.encode(value.replace(microsecond=0).isoformat())
    else:
        raise ValueError(f"Cannot encode type {type(value)} to CBOR")


def get_canonical_hash(model: BaseModel, exclude_fields: set[str] | None = None) -> str:
    """
    Compute a deterministic SHA-256 hash of a Pydantic model using canonical CBOR encoding.

    Args:
        model: Pydantic model instance to hash
        exclude_fields: Optional set of top-level field names to leave out
                       (timestamps, environment, the fingerprint itself)

    Returns:
        str: Hexadecimal SHA-256 hash (64 characters)

    Example:
        >>> from hcgl_core.schemas import ExperimentConfig
        >>> a = get_canonical_hash(ExperimentConfig(L=4, sigma=10.0))
        >>> b = get_canonical_hash(ExperimentConfig(L=4, nu=10.0))
        >>> assert a == b
    """
    model_dict = normalize_value(model.model_dump())
    if exclude_fields:
        for field in exclude_fields:
            model_dict.pop(field, None)

    cbor_bytes = cbor2.dumps(model_dict, canonical=True, default=_cbor_default_encoder)
    return hashlib.sha256(cbor_bytes).hexdigest()


def verify_hash(model: BaseModel, expected_hash: str, exclude_fields: set[str] | None = None) -> bool:
    return get_canonical_hash(model, exclude_fields) == expected_hash


def to_json(model: BaseModel, indent: int = 2) -> str:
    """Dump a model as JSON with floats rounded to 12 significant digits."""
    data = normalize_value(model.model_dump(mode="python"))
    return json.dumps(data, indent=indent, ensure_ascii=False, allow_nan=True)
