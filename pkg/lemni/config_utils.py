"""Config layer: tagged dataclasses, TOML defaults, CLI precedence, flat overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path
from typing import get_args, get_origin, get_type_hints

import toml as tomllib  # type: ignore
from simple_parsing import ArgumentParser

DEFAULT_CONFIG_FILENAME = "lemni.toml"


def config_dataclass(
    section_name: str,
    *,
    dataclass_factory=dataclass,
    **dataclass_kwargs,
):
    """Dataclass wrapper that tags a class with a config section name."""

    def decorator(cls):
        setattr(cls, "config_section", section_name)
        return dataclass_factory(cls, **dataclass_kwargs)

    return decorator


@dataclass(frozen=True)
class _ConfigSection:
    """A config section discovered from a dataclass tree."""
    name: str
    cls: type
    path: tuple[str, ...]


def _is_dataclass_type(tp) -> bool:
    return isinstance(tp, type) and is_dataclass(tp)


def _is_path_type(tp) -> bool:
    if tp is Path:
        return True
    origin = get_origin(tp)
    if origin is None:
        return False
    return Path in get_args(tp)


def _section_name(cls, fallback: str) -> str:
    return getattr(cls, "config_section", None) or fallback


def iter_config_sections(root_cls) -> list[_ConfigSection]:
    """Collect config sections from a root dataclass by walking nested dataclasses."""
    sections = [_ConfigSection(_section_name(root_cls, root_cls.__name__.lower()), root_cls, ())]

    def walk(cls, path: tuple[str, ...]) -> None:
        hints = get_type_hints(cls, include_extras=True)
        for f in fields(cls):
            f_type = hints.get(f.name, f.type)
            if _is_dataclass_type(f_type):
                nested_path = path + (f.name,)
                sections.append(_ConfigSection(_section_name(f_type, f.name), f_type, nested_path))
                walk(f_type, nested_path)

    walk(root_cls, ())
    return sections


def _get_section_obj(root, path: tuple[str, ...]):
    obj = root
    for attr in path:
        obj = getattr(obj, attr)
    return obj


def _section_field_map(section_cls) -> dict[str, type]:
    """Map non-dataclass field names to their types for a section class."""
    hints = get_type_hints(section_cls, include_extras=True)
    return {
        f.name: hints.get(f.name, f.type)
        for f in fields(section_cls)
        if not _is_dataclass_type(hints.get(f.name, f.type))
    }


def _clear_dataclass_instance(obj) -> None:
    for f in fields(type(obj)):
        value = getattr(obj, f.name)
        if is_dataclass(value):
            _clear_dataclass_instance(value)
        else:
            object.__setattr__(obj, f.name, None)


def _make_unset_instance(cls):
    obj = cls()
    _clear_dataclass_instance(obj)
    return obj


def discover_config_path(
    argv: list[str] | None,
    *,
    flag_names: tuple[str, ...] = ("-c", "--config_path"),
    default_filename: str = DEFAULT_CONFIG_FILENAME,
    cwd: Path | None = None,
) -> Path | None:
    """Find a config file from a CLI flag, else `default_filename` in `cwd`."""
    args = argv if argv is not None else []
    for i, a in enumerate(args):
        if a in flag_names and i + 1 < len(args):
            return Path(args[i + 1])
        if a.startswith(tuple(f"{name}=" for name in flag_names)):
            return Path(a.split("=", 1)[1])
    base = cwd if cwd is not None else Path.cwd()
    default_cfg = base / default_filename
    return default_cfg if default_cfg.is_file() else None


def parse_known_args_for(
    root_cls,
    *,
    description: str | None = None,
    argv: list[str] | None = None,
    parser_factory=ArgumentParser,
):
    """Parse CLI args for a config dataclass; returns (params, unparsed extras)."""
    parser = parser_factory(description=description)
    parser.add_arguments(root_cls, dest="params")
    args, extra = parser.parse_known_args(argv)
    return args.params, extra


def load_config_defaults_for(cfg_path: Path | None, *, root_cls):
    """Load a TOML file into a root dataclass instance whose unset fields are None."""
    params = _make_unset_instance(root_cls)
    sections = iter_config_sections(root_cls)

    if cfg_path and cfg_path.is_file():
        with cfg_path.open("r", encoding="utf-8") as f:
            toml_data = tomllib.load(f)

        allowed_sections = {s.name for s in sections}
        unknown_sections = [k for k in toml_data.keys() if k not in allowed_sections]
        if unknown_sections:
            raise ValueError("Unknown config section(s): " + ", ".join(sorted(unknown_sections)))

        unknown_keys: list[str] = []
        for section in sections:
            section_data = toml_data.get(section.name, {})
            if not section_data:
                continue
            field_map = _section_field_map(section.cls)
            extra = sorted(set(section_data.keys()) - set(field_map.keys()))
            if extra:
                unknown_keys.append(f"[{section.name}]: " + ", ".join(extra))
                continue
            target = _get_section_obj(params, section.path)
            for k, v in section_data.items():
                if _is_path_type(field_map[k]) and v is not None:
                    v = Path(v)
                object.__setattr__(target, k, v)

        if unknown_keys:
            raise ValueError("Unknown config key(s): " + "; ".join(unknown_keys))

    return params


def merge_cli_args_with_config_for(
    cli_args,
    config_path: Path | None,
    *,
    root_cls,
    normalize=None,
):
    """Fill CLI fields still at their default from the config file (CLI wins)."""
    config_params = load_config_defaults_for(config_path, root_cls=root_cls)
    if normalize is not None:
        normalize(config_params)
        normalize(cli_args)
    default_params = root_cls()

    def merge_section(cli_section, config_section, default_section) -> None:
        for f in fields(type(cli_section)):
            k = f.name
            current = getattr(cli_section, k, None)
            v = getattr(config_section, k, None)
            default = getattr(default_section, k, None)
            if is_dataclass(current):
                merge_section(current, v, default)
                continue
            if isinstance(v, list):
                if current is None or current == [] or current == default:
                    object.__setattr__(cli_section, k, v)
                else:
                    merged = v + [item for item in current if item not in v]
                    object.__setattr__(cli_section, k, merged)
            elif v is not None and (current is None or current == "" or current == default):
                object.__setattr__(cli_section, k, v)

    merge_section(cli_args, config_params, default_params)
    if normalize is not None:
        normalize(cli_args)
    return cli_args


def _coerce(raw: str, typ):
    """Convert an override string to a section field's type."""
    if typ is bool or (get_origin(typ) is not None and bool in get_args(typ)):
        lowered = raw.strip().lower()
        if lowered in {"1", "true", "yes", "on"}:
            return True
        if lowered in {"0", "false", "no", "off"}:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    for candidate in (int, float):
        if typ is candidate or (get_origin(typ) is not None and candidate in get_args(typ)):
            return candidate(raw)
    if _is_path_type(typ):
        return Path(raw)
    return raw


def apply_overrides(root, overrides: list[str] | dict[str, str]) -> dict[str, object]:
    """Apply flat `key=value` overrides onto whichever section owns `key`.

    Keys may be bare (`phase_step_max=0.01`) or section-qualified
    (`trace.phase_step_max=0.01`). Returns the applied {section.key: value}.
    """
    if isinstance(overrides, dict):
        items = list(overrides.items())
    else:
        items = []
        for entry in overrides:
            if "=" not in entry:
                raise ValueError(f"override must look like key=value: {entry!r}")
            key, value = entry.split("=", 1)
            items.append((key.strip(), value.strip()))

    sections = [s for s in iter_config_sections(type(root)) if s.path]
    applied: dict[str, object] = {}
    for key, raw in items:
        section_filter, _, name = key.rpartition(".")
        owners = [
            s for s in sections
            if name in _section_field_map(s.cls) and (not section_filter or s.name == section_filter)
        ]
        if not owners:
            raise ValueError(f"Unknown option: {key}")
        for section in owners:
            target = _get_section_obj(root, section.path)
            value = _coerce(str(raw), _section_field_map(section.cls)[name])
            object.__setattr__(target, name, value)
            applied[f"{section.name}.{name}"] = value
    return applied


def section_dict(obj) -> dict:
    """Plain nested dict of a config dataclass (Paths as strings)."""
    out = {}
    for f in fields(type(obj)):
        value = getattr(obj, f.name)
        if is_dataclass(value):
            out[f.name] = section_dict(value)
        elif isinstance(value, Path):
            out[f.name] = str(value)
        else:
            out[f.name] = value
    return out
