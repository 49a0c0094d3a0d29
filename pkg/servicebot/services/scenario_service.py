import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from servicebot.errors import GiveUp, ServiceBotError, WorldError
from servicebot.models import RunEvent, ScenarioRun, db
from servicebot.services.dispatcher import Dispatcher
from servicebot.services.inference import load_cost_model_file
from servicebot.services.kb_service import KBService, KBStore
from servicebot.services.library import DUMMY_FUNCTIONS, KB_FUNCTIONS, DialogueChannel, register_library
from servicebot.services.preferences import HOME_FUNCTIONS, HomeSession
from servicebot.services.sitlog import ScriptedInput, SitLogEngine, load_program_files
from servicebot.services.world import Dialogue, ScriptedReplies, load_scenario_file
from servicebot.utils.terms import print_term
from servicebot.utils.trace import TraceRenderer

logger = logging.getLogger(__name__)

# kind -> (data sub-directory, file suffix)
DATA_LAYOUT = {
    "scenario": ("scenarios", ".scn"),
    "kb": ("kb", ".kb"),
    "program": ("programs", ".sitlog"),
    "cost_model": ("costs", ".cm"),
    "golden": ("golden", ".txt"),
}

EXIT_DONE = 0
EXIT_LOAD_ERROR = 1
EXIT_GAVE_UP = 2


@dataclass
class LoadedScenario:
    scenario: object
    kb: Optional[KBStore]
    programs: dict = field(default_factory=dict)
    cost_model: object = None

    @property
    def recovery(self):
        return self.programs.get("recovery")

    @property
    def flow_program(self):
        for name, program in self.programs.items():
            if name != "recovery":
                return program
        return None


@dataclass
class RunOutcome:
    scenario: str
    flow: str
    seed: int
    status: str = "done"
    exit_code: int = EXIT_DONE
    message: Optional[str] = None
    out_arg: object = None
    events: list = field(default_factory=list)
    traces: list = field(default_factory=list)
    dialogue: Optional[Dialogue] = None
    kb: Optional[KBStore] = None
    world: object = None
    run_id: Optional[int] = None

    def records(self):
        """Run record entries, numbered in the order they happened."""
        return [{"sequence": n, **event} for n, event in enumerate(self.events, start=1)]

    def trace_text(self):
        return "\n".join(
            TraceRenderer.render(t.history, t.out_arg, t.globals) for t in self.traces
        )

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "flow": self.flow,
            "seed": self.seed,
            "status": self.status,
            "exit_code": self.exit_code,
            "message": self.message,
            "out_arg": print_term(self.out_arg) if self.out_arg is not None else None,
            "run_id": self.run_id,
        }


def _utterance_event(utterance):
    return {"kind": "dialogue", **utterance.to_dict()}


class ScenarioService:
    """Loads scenario files and runs them end to end."""

    @staticmethod
    def resolve_path(kind, name, data_dir):
        """
        Resolve a file given by path or by its short name under the data directory.

        Args:
            kind (str): scenario, kb, program, cost_model or golden
            name (str): Existing path, or a name such as ``supermarket``
            data_dir (str): Root of the shipped data files

        Returns:
            Path: The file path (existence is checked by the loaders)
        """
        path = Path(name)
        if path.exists() or path.suffix:
            return path
        subdir, suffix = DATA_LAYOUT[kind]
        return Path(data_dir) / subdir / f"{name}{suffix}"

    @staticmethod
    def _read(kind, path, loader):
        if not path.exists():
            raise ServiceBotError(f"{kind} file not found", source=str(path))
        return loader(path)

    @staticmethod
    def load(scenario_name, data_dir, program_names=None, kb_name=None, cost_model_name=None, seed=None,
             default_seed=7, default_hand="right"):
        """
        Load a scenario and every file it names; command-line names override the scenario's.

        Returns:
            LoadedScenario: Scenario, KB store, programs by name and cost model

        Raises:
            ServiceBotError: on missing or malformed files, carrying the file path
        """
        path = ScenarioService.resolve_path("scenario", scenario_name, data_dir)
        scenario = ScenarioService._read("scenario", path,
                                         lambda p: load_scenario_file(p, default_hand=default_hand))
        if seed is None and scenario.seed is None:
            seed = default_seed
        if seed is not None:
            scenario.seed = seed
            scenario.world = replace(scenario.world, rng_seed=seed)

        kb = None
        kb_name = kb_name or scenario.kb
        if kb_name:
            kb_path = ScenarioService.resolve_path("kb", kb_name, data_dir)
            taxonomy = ScenarioService._read("kb", kb_path, KBService.load_kb_file)
            kb = KBStore(taxonomy, source=str(kb_path))

        programs = {}
        for name in program_names or scenario.programs:
            program_path = ScenarioService.resolve_path("program", name, data_dir)
            programs[program_path.stem] = ScenarioService._read(
                "program", program_path, lambda p: load_program_files([p]))

        cost_model = None
        cost_model_name = cost_model_name or scenario.cost_model
        if cost_model_name:
            cost_path = ScenarioService.resolve_path("cost_model", cost_model_name, data_dir)
            cost_model = ScenarioService._read("cost model", cost_path, load_cost_model_file)

        logger.info(f"Loaded scenario {scenario.name} ({scenario.flow}) with programs {list(programs)}")
        return LoadedScenario(scenario, kb, programs, cost_model)

    @staticmethod
    def run(loaded, replies=None, commands=None, maximize=True, max_cycles=4):
        """
        Run a loaded scenario with its flow: gpsr, home or sitlog.

        Args:
            loaded (LoadedScenario): Files to run
            replies (callable): Reply source; the scenario's scripted replies by default
            commands (list): Commands or script items; the scenario's by default
            maximize (bool): Decision mode of the inference cycle
            max_cycles (int): Inference cycles before giving up

        Returns:
            RunOutcome: Status, exit code, run record, traces and final state
        """
        scenario = loaded.scenario
        outcome = RunOutcome(scenario.name, scenario.flow, scenario.seed, kb=loaded.kb, world=scenario.world)
        dialogue = Dialogue(replies or ScriptedReplies(scenario.replies), user=scenario.user,
                            listener=lambda u: outcome.events.append(_utterance_event(u)))
        outcome.dialogue = dialogue
        commands = scenario.commands if commands is None else commands
        outcome.events.append({"kind": "start", "scenario": scenario.name, "flow": scenario.flow,
                               "seed": scenario.seed})
        logger.info(f"Running scenario {scenario.name}, flow {scenario.flow}, seed {scenario.seed}")
        try:
            if scenario.flow == "gpsr":
                ScenarioService._run_gpsr(loaded, dialogue, commands, outcome, maximize, max_cycles)
            elif scenario.flow == "home":
                ScenarioService._run_home(loaded, dialogue, outcome)
            elif scenario.flow == "sitlog":
                ScenarioService._run_sitlog(loaded, dialogue, commands, outcome)
            else:
                raise WorldError(f"unknown flow {scenario.flow!r}", source=scenario.source)
        except GiveUp as e:
            logger.warning(f"Gave up: {e}")
            outcome.status, outcome.exit_code, outcome.message = "gave_up", EXIT_GAVE_UP, str(e)
        except ServiceBotError as e:
            logger.error(f"Scenario {scenario.name} failed: {e}")
            outcome.status, outcome.exit_code, outcome.message = "failed", EXIT_LOAD_ERROR, str(e)
        outcome.events.append({"kind": "end", "status": outcome.status, "message": outcome.message})
        logger.info(f"Scenario {scenario.name} finished: {outcome.status}")
        return outcome

    @staticmethod
    def _run_gpsr(loaded, dialogue, commands, outcome, maximize, max_cycles):
        scenario = loaded.scenario
        if loaded.kb is None or loaded.cost_model is None:
            raise WorldError("the gpsr flow needs a kb and a cost model", source=scenario.source)
        dispatcher = Dispatcher(
            scenario.world, loaded.kb, dialogue, loaded.cost_model,
            recovery=loaded.recovery, rng=random.Random(scenario.seed), user=scenario.user,
            maximize=maximize, max_cycles=max_cycles, events=outcome.events,
        )
        try:
            dispatcher.run(commands)
        finally:
            outcome.world = dispatcher.world
            outcome.traces.extend(dispatcher.traces)

    @staticmethod
    def _run_home(loaded, dialogue, outcome):
        scenario = loaded.scenario
        program = loaded.flow_program
        if loaded.kb is None or program is None:
            raise WorldError("the home flow needs a kb and a program", source=scenario.source)
        session = HomeSession(scenario.world, loaded.kb, dialogue, user=scenario.user,
                              preference_items=scenario.preference_items, recovery=loaded.recovery,
                              events=outcome.events)
        engine = SitLogEngine(program, services={"session": session, "kb": loaded.kb})
        register_library(engine, KB_FUNCTIONS, HOME_FUNCTIONS)
        DialogueChannel(dialogue).attach(engine)
        try:
            result = engine.run(scenario.pipe)
            outcome.out_arg = result.out_arg
            outcome.traces.append(result)
        finally:
            outcome.world = session.world

    @staticmethod
    def _run_sitlog(loaded, dialogue, commands, outcome):
        program = loaded.flow_program
        if program is None:
            raise WorldError("the sitlog flow needs a program", source=loaded.scenario.source)
        engine = SitLogEngine(program, services={"kb": loaded.kb, "world": loaded.scenario.world})
        register_library(engine, DUMMY_FUNCTIONS, KB_FUNCTIONS)
        DialogueChannel(dialogue).attach(engine)
        engine.register_input_provider("speech", ScriptedInput(commands))
        result = engine.run(loaded.scenario.pipe)
        outcome.out_arg = result.out_arg
        outcome.traces.append(result)

    @staticmethod
    def persist(outcome):
        """
        Store a run and its events.

        Returns:
            int: Id of the stored ScenarioRun
        """
        run = ScenarioRun(
            scenario=outcome.scenario,
            flow=outcome.flow,
            seed=outcome.seed,
            status=outcome.status,
            exit_code=outcome.exit_code,
            out_arg=print_term(outcome.out_arg) if outcome.out_arg is not None else None,
            message=outcome.message,
        )
        db.session.add(run)
        db.session.flush()
        for record in outcome.records():
            payload = {k: v for k, v in record.items() if k not in ("sequence", "kind")}
            db.session.add(RunEvent(run_id=run.id, sequence=record["sequence"], kind=record["kind"],
                                    payload=json.dumps(payload, default=str)))
        db.session.commit()
        outcome.run_id = run.id
        logger.info(f"Stored run {run.id} with {len(outcome.events)} events")
        return run.id

    @staticmethod
    def write_record(outcome, path):
        """Write the run record as JSON lines."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as f:
            for record in outcome.records():
                f.write(json.dumps(record, default=str) + "\n")
        return path

    @staticmethod
    def write_trace(outcome, path):
        path = Path(path)
        path.write_text(outcome.trace_text(), encoding="utf-8")
        return path
