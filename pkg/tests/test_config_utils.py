from __future__ import annotations

from dataclasses import field
from pathlib import Path

import pytest

from lemni import config_utils
from lemni.cli import JobSpec
from lemni.levelset import TraceOptions


@config_utils.config_dataclass("inner")
class _Inner:
    value: int | None = None
    ratio: float = 0.5
    flag: bool = False


@config_utils.config_dataclass("root")
class _Root:
    inner: _Inner = field(default_factory=_Inner)
    name: str | None = None
    path: Path | None = None
    items: list[str] = field(default_factory=list)


def test_discover_config_path_cli_flag(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("[root]\nname = 'x'\n")
    argv = ["prog", "-c", str(cfg)]

    found = config_utils.discover_config_path(argv, cwd=tmp_path)

    assert found == cfg


def test_discover_config_path_equals_form(tmp_path):
    cfg = tmp_path / "cfg.toml"

    found = config_utils.discover_config_path([f"--config_path={cfg}"], cwd=tmp_path)

    assert found == cfg


def test_discover_config_path_default(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text("[root]\nname = 'x'\n")

    found = config_utils.discover_config_path([], cwd=tmp_path)

    assert found == cfg


def test_discover_config_path_none(tmp_path):
    assert config_utils.discover_config_path([], cwd=tmp_path) is None


def test_load_config_defaults_for_nested(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text(
        """\
[root]
name = "Config Name"
path = "out"
items = ["a"]

[inner]
value = 42
"""
    )

    params = config_utils.load_config_defaults_for(cfg, root_cls=_Root)

    assert params.name == "Config Name"
    assert params.path == Path("out")
    assert params.items == ["a"]
    assert params.inner.value == 42
    assert params.inner.ratio is None


def test_merge_cli_args_with_config_for_lists(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text(
        """\
[root]
items = ["a"]
"""
    )
    cli = _Root(items=["b"])

    merged = config_utils.merge_cli_args_with_config_for(cli, cfg, root_cls=_Root)

    assert merged.items == ["a", "b"]


def test_merge_prefers_cli_values(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text("[root]\nname = 'config'\n\n[inner]\nvalue = 1\nratio = 0.25\n")
    cli = _Root(name="cli", inner=_Inner(value=7))

    merged = config_utils.merge_cli_args_with_config_for(cli, cfg, root_cls=_Root)

    assert merged.name == "cli"
    assert merged.inner.value == 7
    assert merged.inner.ratio == 0.25


def test_load_config_defaults_for_unknown_section(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text(
        """\
[root]
name = "ok"

[unknown]
value = "nope"
"""
    )

    with pytest.raises(ValueError, match=r"Unknown config section"):
        config_utils.load_config_defaults_for(cfg, root_cls=_Root)


def test_unknown_config_key_raises(tmp_path):
    cfg = tmp_path / "lemni.toml"
    cfg.write_text(
        """\
[trace]
phase_step_max = 0.01
does_not_exist = true
"""
    )

    with pytest.raises(ValueError, match=r"Unknown config key"):
        config_utils.load_config_defaults_for(cfg, root_cls=JobSpec)


def test_job_sections_discovered():
    names = {s.name for s in config_utils.iter_config_sections(JobSpec)}

    assert names == {"lemni", "trace", "length", "search", "sphere", "poly"}


def test_apply_overrides_bare_and_qualified():
    root = _Root()

    applied = config_utils.apply_overrides(root, ["value=3", "inner.ratio=0.75", "flag=yes"])

    assert root.inner.value == 3
    assert root.inner.ratio == 0.75
    assert root.inner.flag is True
    assert applied == {"inner.value": 3, "inner.ratio": 0.75, "inner.flag": True}


def test_apply_overrides_reaches_every_owner():
    job = JobSpec()

    applied = config_utils.apply_overrides(job, {"residual_tol": "1e-11"})

    assert job.trace.residual_tol == 1e-11
    assert job.poly.residual_tol == 1e-11
    assert set(applied) == {"trace.residual_tol", "poly.residual_tol"}


@pytest.mark.parametrize("entry", ["no_equals_sign", "nonexistent=1", "flag=maybe"])
def test_apply_overrides_rejects(entry):
    with pytest.raises(ValueError):
        config_utils.apply_overrides(_Root(), [entry])


def test_section_dict():
    out = config_utils.section_dict(_Root(path=Path("a/b")))

    assert out["path"] == "a/b"
    assert out["inner"] == {"value": None, "ratio": 0.5, "flag": False}


def test_config_dataclass_tags_section():
    assert TraceOptions.config_section == "trace"
    assert JobSpec.config_section == "lemni"
