import json
import os
from typing import Literal

import numpy as np
import pydantic

from specfactors.divisors import SubspacePart, SubspaceSpec
from specfactors.errors import ModelFileError
from specfactors.matnum import ToleranceConfig
from specfactors.statespace import Realization


EXAMPLE_ASSET_PATH_DICT = {
    "w_minus": "assets/models/stochastic_example.json",
    "w_bar_minus": "assets/models/stochastic_example_w_bar_minus.json",
    "class_zero_specs": "assets/specs/stochastic_example_class_zero.json",
    "golden": "assets/definitions/stochastic_example_golden.json",
}


def load_json(path: str) -> dict | list:
    """
    Load a JSON file.
    """
    with open(path, 'r') as f:
        return json.load(f)


def save_json(data: dict | list, path: str):
    """
    Save a JSON file.
    """
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
        f.write('\n')


def get_path(rel_path: str) -> str:
    """
    Get the path to a file in the project.
    """
    base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    return os.path.join(base_path, rel_path)


class ModelFile(pydantic.BaseModel):
    """
    A realization on disk: name, A, B, C, D as nested row-major arrays and
    optional tolerance overrides.
    """
    model_config = pydantic.ConfigDict(populate_by_name=True, allow_inf_nan=False)

    name: str = "model"
    a: list[list[float]] = pydantic.Field(alias="A")
    b: list[list[float]] = pydantic.Field(alias="B")
    c: list[list[float]] = pydantic.Field(alias="C")
    d: list[list[float]] = pydantic.Field(alias="D")
    tolerances: ToleranceConfig | None = None

    @pydantic.model_validator(mode="after")
    def _check_realization(self) -> "ModelFile":
        self.to_realization()
        return self

    def to_realization(self) -> Realization:
        return Realization(a=self.a, b=self.b, c=self.c, d=self.d)

    @classmethod
    def from_realization(
        cls,
        r: Realization,
        name: str = "model",
        tolerances: ToleranceConfig | None = None,
    ) -> "ModelFile":
        return cls(
            name=name,
            A=r.a.tolist(),
            B=r.b.tolist(),
            C=r.c.tolist(),
            D=r.d.tolist(),
            tolerances=tolerances,
        )


def _matrix_lines(key: str, rows: list[list[float]], last: bool) -> list[str]:
    end = "" if last else ","
    if not rows:
        return [f'  "{key}": []{end}']
    body = [f"    {json.dumps([float(x) for x in row])}" for row in rows]
    body = [line + "," for line in body[:-1]] + body[-1:]
    return [f'  "{key}": ['] + body + [f"  ]{end}"]


def model_to_json_text(model: ModelFile) -> str:
    """
    Canonical text of a model file: one matrix row per line, floats in
    shortest round-trip form.
    """
    lines = ["{", f'  "name": {json.dumps(model.name)},']
    keys = [("A", model.a), ("B", model.b), ("C", model.c), ("D", model.d)]
    for idx, (key, rows) in enumerate(keys):
        last = idx == len(keys) - 1 and model.tolerances is None
        lines += _matrix_lines(key, rows, last)
    if model.tolerances is not None:
        lines.append(f'  "tolerances": {json.dumps(model.tolerances.model_dump())}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_model(path: str) -> ModelFile:
    try:
        return ModelFile.model_validate(load_json(path))
    except (OSError, json.JSONDecodeError, pydantic.ValidationError, ValueError) as e:
        raise ModelFileError(f"cannot read model file {path}: {e}")


def save_model(model: ModelFile, path: str):
    with open(path, 'w') as f:
        f.write(model_to_json_text(model))


class DivisorSpecEntry(pydantic.BaseModel):
    """
    One subspace in a spec file. Each block takes a selection or a basis.
    """
    model_config = pydantic.ConfigDict(allow_inf_nan=False)

    label: str | None = None
    gamma_select: list[int] | Literal["all"] | None = None
    gamma_basis: list[list[float]] | None = None
    a_select: list[int] | Literal["all"] | None = None
    a_basis: list[list[float]] | None = None
    theta_grid: int | None = pydantic.Field(default=None, ge=1)

    @pydantic.model_validator(mode="after")
    def _one_per_block(self) -> "DivisorSpecEntry":
        if self.gamma_select is not None and self.gamma_basis is not None:
            raise ValueError("gamma_select and gamma_basis are exclusive")
        if self.a_select is not None and self.a_basis is not None:
            raise ValueError("a_select and a_basis are exclusive")
        return self

    def to_subspace_spec(self) -> SubspaceSpec:
        def _part(select, basis) -> SubspacePart:
            return SubspacePart(select=select, basis=None if basis is None else np.array(basis))
        return SubspaceSpec(
            gamma=_part(self.gamma_select, self.gamma_basis),
            a=_part(self.a_select, self.a_basis),
            theta_grid=self.theta_grid,
            label=self.label,
        )


class DivisorSpecFile(pydantic.BaseModel):
    specs: list[DivisorSpecEntry] = []


def load_specs(path: str) -> list[SubspaceSpec]:
    """
    Load a spec file: {"specs": [...]} or a bare list of entries.
    """
    try:
        data = load_json(path)
        if isinstance(data, list):
            data = {"specs": data}
        spec_file = DivisorSpecFile.model_validate(data)
        return [entry.to_subspace_spec() for entry in spec_file.specs]
    except (OSError, json.JSONDecodeError, pydantic.ValidationError, ValueError) as e:
        raise ModelFileError(f"cannot read spec file {path}: {e}")


def load_example_model(name: str = "w_minus") -> ModelFile:
    return load_model(get_path(EXAMPLE_ASSET_PATH_DICT[name]))
