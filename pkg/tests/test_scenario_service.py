"""
unit tests for servicebot.services.scenario_service
"""
import json

from pytest import mark, raises

from servicebot.errors import ServiceBotError
from servicebot.models import RunEvent, ScenarioRun, db
from servicebot.services.scenario_service import EXIT_DONE, EXIT_LOAD_ERROR, ScenarioService
from servicebot.utils.terms import sym
from servicebot.utils.trace import TraceRenderer


@mark.parametrize(
    "kind, name, relative",
    [
        ("scenario", "home", "scenarios/home.scn"),
        ("kb", "animals", "kb/animals.kb"),
        ("program", "recovery", "programs/recovery.sitlog"),
        ("cost_model", "supermarket", "costs/supermarket.cm"),
        ("golden", "dummy_trace", "golden/dummy_trace.txt"),
    ],
)
def test_resolve_path(data_dir, kind, name, relative):
    """resolve_path() - short names map into the data directory"""
    assert ScenarioService.resolve_path(kind, name, data_dir) == data_dir / relative


def test_resolve_path_keeps_explicit_files(data_dir, tmp_path):
    """resolve_path() - paths with a suffix are used as given"""
    path = tmp_path / "mine.scn"
    assert ScenarioService.resolve_path("scenario", str(path), data_dir) == path


def test_load_supermarket(data_dir):
    """load() - every file the scenario names"""
    loaded = ScenarioService.load("supermarket", data_dir)
    assert loaded.scenario.flow == "gpsr"
    assert loaded.scenario.seed == 7
    assert set(loaded.programs) == {"recovery"}
    assert loaded.recovery is not None
    assert loaded.flow_program is None
    assert loaded.cost_model.r_max == 60
    assert loaded.kb.taxonomy.is_individual("heineken")


def test_load_overrides(data_dir):
    """load() - the seed and the program list given explicitly win"""
    loaded = ScenarioService.load("home", data_dir, program_names=["dummy"], seed=11)
    assert loaded.scenario.seed == 11
    assert loaded.scenario.world.rng_seed == 11
    assert set(loaded.programs) == {"dummy"}
    assert loaded.recovery is None


def test_load_default_seed(data_dir):
    """load() - scenarios without seed/1 get the default"""
    loaded = ScenarioService.load("home", data_dir, default_seed=3)
    assert loaded.scenario.seed == 3


@mark.parametrize(
    "kwargs",
    [{"scenario_name": "nowhere"}, {"scenario_name": "home", "kb_name": "nowhere"},
     {"scenario_name": "home", "program_names": ["nowhere"]},
     {"scenario_name": "supermarket", "cost_model_name": "nowhere"}],
)
def test_load_missing_files(data_dir, kwargs):
    """load() - a missing file is reported with its path"""
    with raises(ServiceBotError) as e:
        ScenarioService.load(data_dir=data_dir, **kwargs)
    assert "nowhere" in e.value.source


def test_run_dummy_matches_golden(data_dir):
    """run() - the sitlog flow reproduces the golden trace"""
    outcome = ScenarioService.run(ScenarioService.load("dummy", data_dir))
    assert outcome.exit_code == EXIT_DONE
    assert outcome.out_arg == sym("monday")
    golden = (data_dir / "golden" / "dummy_trace.txt").read_text(encoding="utf-8")
    assert TraceRenderer.compare(outcome.trace_text(), golden) == (True, None)


def test_run_unknown_flow(data_dir, tmp_path):
    """run() - an unknown flow fails the run"""
    path = tmp_path / "odd.scn"
    path.write_text("flow(dance).\nlocation(hall).\n", encoding="utf-8")
    outcome = ScenarioService.run(ScenarioService.load(str(path), data_dir))
    assert outcome.status == "failed"
    assert outcome.exit_code == EXIT_LOAD_ERROR
    assert "unknown flow" in outcome.message
    assert [e["kind"] for e in outcome.events] == ["start", "end"]


def test_write_record(data_dir, tmp_path):
    """write_record() - one numbered JSON object per event"""
    outcome = ScenarioService.run(ScenarioService.load("supermarket", data_dir))
    path = ScenarioService.write_record(outcome, tmp_path / "run.jsonl")
    records = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert [r["sequence"] for r in records] == list(range(1, len(outcome.events) + 1))
    assert records[0]["kind"] == "start"
    assert records[-1] == {"sequence": len(records), "kind": "end", "status": "done", "message": None}


def test_write_trace(data_dir, tmp_path):
    """write_trace() - the rendered traces of the run"""
    outcome = ScenarioService.run(ScenarioService.load("dummy", data_dir))
    path = ScenarioService.write_trace(outcome, tmp_path / "trace.txt")
    assert path.read_text(encoding="utf-8") == outcome.trace_text()


def test_persist(app, data_dir):
    """persist() - the run and its events are stored in order"""
    outcome = ScenarioService.run(ScenarioService.load("home", data_dir))
    with app.app_context():
        run_id = ScenarioService.persist(outcome)
        run = db.session.get(ScenarioRun, run_id)
        assert (run.scenario, run.flow, run.status, run.out_arg) == ("home", "home", "done", "living_room")
        assert RunEvent.query.filter_by(run_id=run_id).count() == len(outcome.events)
        assert [e.sequence for e in run.events] == list(range(1, len(outcome.events) + 1))
    assert outcome.run_id == run_id


def test_persist_supermarket(app, data_dir):
    """persist() - behavior events keep their event kind next to the failure"""
    outcome = ScenarioService.run(ScenarioService.load("supermarket", data_dir))
    with app.app_context():
        run_id = ScenarioService.persist(outcome)
        kinds = [e.kind for e in db.session.get(ScenarioRun, run_id).events]
    assert None not in kinds
    assert kinds.count("inference_cycle") == 2
    assert {"diagnosis", "run_out", "substitute"} <= set(kinds)
