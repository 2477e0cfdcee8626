import json

import pytest

from fractions import Fraction

from matching_sparsifier.misc import ParseError
from matching_sparsifier.rng import RngStream
from matching_sparsifier.state import (
    GeneratorSpec,
    GraphKind,
    SparsifierConfig,
    State,
    VimatchParams,
    init_config,
    load_config,
)


def test_defaults_are_valid():
    assert State().problems() == []


def test_save_and_load(tmp_path):
    path = tmp_path / "config.json"
    state = State()
    state.sparsifier.epsilon = Fraction(1, 4)
    state.sparsifier.r_override = 32
    state.vimatch.alpha = 5
    state.experiment.generator = "path:n=5,w=3"
    state.experiment.r_values = [2, 8]
    state.experiment.vary_graph = True
    state.experiment.ratio_pilot = 0.9
    state.save(path)

    loaded = load_config(path)
    assert loaded.to_dict() == state.to_dict()
    assert loaded.sparsifier.epsilon == Fraction(1, 4)
    assert json.loads(path.read_text())["sparsifier"]["epsilon"] == "1/4"


def test_init_config(tmp_path):
    path = tmp_path / "config.json"
    init_config(path)
    assert load_config(path).to_dict() == State().to_dict()


def test_partial_config_keeps_defaults(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"sparsifier": {"p": "0.25"}}))
    state = load_config(path)
    assert state.sparsifier.p == Fraction(1, 4)
    assert state.vimatch.to_dict() == VimatchParams().to_dict()


@pytest.mark.parametrize(
    "content",
    [
        {"sparsifier": {"epsilon": "three tenths"}},
        {"sparsifier": {"q_samples": "many"}},
        {"vimatch": {"asymptotic": "yes"}},
        {"experiment": {"r_values": [1, "2"]}},
        {"experiment": {"ratio_pilot": "0.9"}},
        {"schema_version": 2},
        [],
    ],
)
def test_invalid_config_exits(tmp_path, content):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(content))
    with pytest.raises(SystemExit):
        load_config(path)


def test_malformed_json_exits(tmp_path):
    path = tmp_path / "config.json"
    path.write_text("{")
    with pytest.raises(SystemExit):
        load_config(path)


def test_validate_or_exit():
    state = State()
    state.sparsifier.epsilon = Fraction(1)
    state.experiment.r_values = []
    assert len(state.problems()) == 2
    with pytest.raises(SystemExit):
        state.validate_or_exit()


def test_ratio_pilot_range():
    state = State()
    state.experiment.ratio_pilot = 1.5
    assert len(state.problems()) == 1
    state.experiment.ratio_pilot = 0.88
    assert state.problems() == []


def test_sparsifier_problems():
    assert SparsifierConfig().problems() == []
    assert SparsifierConfig(p=Fraction(0)).problems() != []
    assert SparsifierConfig(blossom_cap=2).problems() != []
    cfg = SparsifierConfig().with_r(16)
    assert cfg.r_override == 16
    assert SparsifierConfig().r_override is None


def test_vimatch_problems():
    assert VimatchParams().problems() == []
    assert VimatchParams(l=6).problems() != []
    assert VimatchParams(alpha=1).problems() != []


def test_asymptotic_parameters():
    params = VimatchParams(asymptotic=True).resolved(Fraction(1, 2))
    assert params.alpha == 4097
    assert params.t == 1048576
    assert params.l == 24
    assert params.problems() == []
    plain = VimatchParams()
    assert plain.resolved(Fraction(1, 2)) is plain


def test_generator_spec():
    spec = GeneratorSpec.parse("er:n=16,m=30,wmin=1,wmax=10")
    assert spec.kind == GraphKind.ER
    assert (spec.n, spec.m, spec.wmin, spec.wmax, spec.w) == (16, 30, 1, 10, None)
    assert str(spec) == "er:n=16,m=30,wmin=1,wmax=10"
    assert str(GeneratorSpec.parse("path:n=3,w=1/2")) == "path:n=3,w=1/2"

    g = spec.build(RngStream(0))
    assert (g.n, g.m) == (16, 30)


@pytest.mark.parametrize(
    "text",
    [
        "star:n=4",
        "er:n=4",
        "er:n=4,m=7",
        "path:n=4,m=3",
        "cycle:n=2",
        "er:m=3",
        "er:n=four,m=3",
        "path:n=3,size=2",
        "path:n=3,wmin",
        "path:n=3,wmin=5,wmax=2",
    ],
)
def test_generator_spec_errors(text):
    with pytest.raises(ParseError):
        GeneratorSpec.parse(text)


def test_experiment_problems(tmp_path):
    state = State()
    state.experiment.generator = "er:n=3,m=9"
    assert state.problems() != []

    state = State()
    state.experiment.generator = None
    state.experiment.graph = tmp_path / "absent.txt"
    assert state.problems() == [f"Graph file does not exist: {tmp_path / 'absent.txt'}"]
