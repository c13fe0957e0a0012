import pytest

from pdeforge.domain import TASK_IDS, registry_get
from pdeforge.prompts import (
    ANALYSIS_STEPS,
    GENESIS_ASSETS,
    PLACEHOLDER,
    MissingAssetError,
    PromptError,
    PromptSet,
    render_text,
)


def test_render_substitutes_and_rejects_missing():
    assert render_text("a {{x}} b {{y}}", x=1, y="two") == "a 1 b two"
    assert render_text("literal {braces} stay", ) == "literal {braces} stay"
    with pytest.raises(PromptError):
        render_text("{{missing}}")


def test_every_asset_is_packaged():
    prompts = PromptSet()
    names = list(ANALYSIS_STEPS) + list(GENESIS_ASSETS.values()) + [
        "system", "code_generation_criteria", "judge_initial", "judge_round", "judge_block",
        "judge_repair", "patch_repair", "debug", "translator", "classify_repair", "genesis_variant",
    ]
    prompts.require(names)
    for task_id in TASK_IDS:
        task = registry_get(task_id)
        text = prompts.describe(task)
        assert not PLACEHOLDER.search(text)
        assert "def solver" in prompts.solver_template(task)


def test_override_dir_shadows_packaged_asset(tmp_path):
    (tmp_path / "system.txt").write_text("custom system {{who}}")
    prompts = PromptSet(tmp_path)
    assert prompts.render("system", who="here") == "custom system here"
    assert prompts.raw("debug") == PromptSet().raw("debug")
    with pytest.raises(MissingAssetError):
        prompts.raw("no_such_asset")
