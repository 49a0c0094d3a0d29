"""
GPSR behavior dispatcher.

Executes behaviors one at a time against the simulated world. Known move
failures run a recovery protocol (a SitLog program) and retry once; an
object that is not where it was believed starts the inference cycle, whose
plan replaces the rest of the current task.
"""

import logging
import random
from collections import deque

from servicebot.errors import GiveUp, NoPlan, NoUnseenShelves, ScriptExhausted, UnknownCommand
from servicebot.services.inference import (
    CLIENT,
    InferenceContext,
    bring,
    decide,
    diagnose,
    gpsr_interpret,
    obligations_cost,
    place,
    plan,
    to_behaviors,
)
from servicebot.services.library import DialogueChannel, register_library
from servicebot.services.sitlog import RunResult, SitLogEngine
from servicebot.services.world import (
    behavior_deliver,
    behavior_find,
    behavior_move,
    behavior_see,
    behavior_take,
)
from servicebot.utils.terms import Compound, Symbol, comp, name_of, print_term

logger = logging.getLogger(__name__)

RECOVERABLE = ("path_blocked", "door_closed")
_COMMAND = "command"


def run_recovery(program, kind, kb, world, dialogue):
    """
    Run a recovery protocol with the error kind as the input pipe.

    Returns:
        RunResult: out_arg is 'recovered' when the protocol fixed the failure; None when
            the user gave no answer
    """
    engine = register_library(SitLogEngine(program, services={"kb": kb, "world": world}))
    DialogueChannel(dialogue).attach(engine)
    try:
        return engine.run(pipe=Symbol(kind))
    except ScriptExhausted:
        logger.warning(f"Recovery from {kind} got no answer")
        return RunResult(None, dict(engine.globals), list(engine.history))


class Dispatcher:
    """
    Runs commands against a world, a KB and a dialogue channel.

    Args:
        world (WorldState): Initial world
        kb (KBStore): Shared beliefs
        dialogue (Dialogue): Ask-channel and transcript
        cost_model (CostModel): Costs, probabilities and r_max
        recovery (Program): SitLog program run on recoverable failures
        rng (random.Random): Generator for the diagnosis distribution
        user (str): Name of the person commands come from
        maximize (bool): Decision mode, see inference.decide
        max_cycles (int): Inference cycles allowed before giving up
        events (list): Run record the dispatcher appends to
    """

    def __init__(self, world, kb, dialogue, cost_model, recovery=None, rng=None, user="user",
                 maximize=True, max_cycles=4, events=None):
        self.world = world
        self.kb = kb
        self.dialogue = dialogue
        self.cost_model = cost_model
        self.recovery = recovery
        self.rng = rng or random.Random(world.rng_seed)
        self.user = user
        self.maximize = maximize
        self.max_cycles = max_cycles
        self.context = InferenceContext(r_max=cost_model.r_max)
        self.events = events if events is not None else []
        self.traces = []
        self.offers = []
        self.cycles = 0
        self.queue = deque()
        self.last_observation = None
        self._handlers = {
            "acknowledge": self._acknowledge,
            "grasp": self._grasp,
            "move": self._move,
            "see": self._see,
            "find": self._find,
            "take": self._take,
            "deliver": self._deliver,
            "say": self._say,
        }

    def record(self, event, **payload):
        self.events.append({"kind": event, **payload})
        logger.debug(f"{event}: {payload}")

    # commands

    def run(self, commands):
        """Carry out every command in order; GiveUp propagates."""
        for command in commands:
            self.execute_command(command)
        self.record("done", offers=list(self.offers))
        return "done"

    def execute_command(self, utterance):
        behaviors = gpsr_interpret(utterance, self.user)
        self.record("command", command=print_term(utterance), behaviors=[print_term(b) for b in behaviors])
        logger.info(f"Command {print_term(utterance)}: {len(behaviors)} behaviors")
        self.dispatch(behaviors)

    def dispatch(self, behaviors, tag=_COMMAND):
        self.queue.extend((b, tag) for b in behaviors)
        while self.queue:
            behavior, _ = self.queue.popleft()
            self.execute(behavior)

    def execute(self, behavior):
        name = name_of(behavior)
        handler = self._handlers.get(name)
        if handler is None:
            raise UnknownCommand(f"no behavior {print_term(behavior)}")
        args = [name_of(a) for a in behavior.args] if isinstance(behavior, Compound) else []
        handler(*args)

    def _status(self, behavior, result):
        self.record("behavior", behavior=behavior, **result.to_dict())
        if not result.is_ok:
            logger.warning(f"{behavior} failed: {result.kind}")

    # behaviors

    def _next_goal(self):
        for behavior, _ in self.queue:
            if name_of(behavior) == "grasp":
                return name_of(behavior.args[0])
        return None

    def _acknowledge(self):
        obj = self._next_goal()
        if obj and self.kb.taxonomy.is_individual(obj) and self.kb.holds(obj, "alcoholic"):
            result = self.dialogue.ask("Are you over eighteen?")
            if not result.is_ok or result.payload != Symbol("yes"):
                self.dialogue.say(f"Sorry, I can only bring the {obj} to adults.")
                self.record("refused", object=obj)
                self._drop_task(obj)
                return
        if obj is None:
            self.dialogue.say("Ok.")
        elif self._goal_for(obj).kind == "CO":
            self.dialogue.say(f"Ok. I will bring you the {obj}.")
        else:
            self.dialogue.say(f"Ok. I will put the {obj} on {self._goal_for(obj).destination}.")

    def _grasp(self, obj):
        shelf = self.kb.believed_location(obj)
        self.record("behavior", behavior=f"kb_get_shelf_of_object({obj})", status="ok", failure=None, payload=shelf)
        if shelf is None:
            raise GiveUp(f"no idea where the {obj} could be")
        steps = [comp("move", Symbol(shelf)), comp("find", Symbol(obj)), comp("take", Symbol(obj))]
        self.queue.extendleft(reversed([(b, _COMMAND) for b in steps]))

    def _move(self, target):
        self.world, result = behavior_move(self.world, target)
        self._status(f"move({target})", result)
        if result.is_ok:
            return
        if result.kind in RECOVERABLE and self._recover(f"move({target})", result.kind):
            self.world, result = behavior_move(self.world, target)
            self._status(f"move({target})", result)
            if result.is_ok:
                return
        raise GiveUp(f"move({target}) failed with {result.kind}")

    def _observe(self, shelf):
        self.world, observation, notifications = behavior_see(self.world, self.kb, shelf)
        self.last_observation = observation
        self.context.remember_shelf(shelf, observation.observed)
        self.record("observation", notifications=notifications, **observation.to_dict())
        for obj in observation.misplaced:
            if obj in self.context.objects_placed or any(o.obj == obj for o in self.context.pending):
                continue
            home = next((s.id for s in self.world.shelves if self.kb.is_a(obj, s.klass)), None)
            if home is not None:
                self.context.pending.append(place(obj, home, source=shelf))
                self.record("pending", obligation=self.context.pending[-1].to_dict())
        return observation

    def _see(self, shelf):
        self._observe(shelf)

    def _find(self, target):
        if target in self.world.people:
            self.world, result = behavior_find(self.world, target)
            self._status(f"find({target})", result)
            if not result.is_ok:
                raise GiveUp(f"could not find {target}")
            return
        shelf = self.world.shelf_at(self.world.robot_at)
        if shelf is None:
            raise GiveUp(f"looking for {target} away from any shelf")
        observation = self._observe(shelf.id)
        if target in observation.observed:
            self.record("behavior", behavior=f"find({target})", status="ok", failure=None, payload=shelf.id)
            return
        self.record("behavior", behavior=f"find({target})", status="error", failure="not_found", payload=shelf.id)
        seen = ", ".join(observation.observed) or "nothing"
        self.dialogue.say(f"I see {seen} but I don't see the {target}.")
        self._inference_cycle(target)

    def _take(self, obj):
        shelf = self.world.shelf_at(self.world.robot_at)
        self.world, result = behavior_take(self.world, self.kb, obj)
        self._status(f"take({obj})", result)
        if result.is_ok:
            if shelf is not None:
                known = self.context.known_states().get(shelf.id, ())
                self.context.remember_shelf(shelf.id, [o for o in known if o != obj])
            self.dialogue.say(f"I took the {obj}.")
            return
        if result.kind == "not_found":
            self._inference_cycle(obj)
            return
        raise GiveUp(f"take({obj}) failed with {result.kind}")

    def _deliver(self, obj, target):
        self.world, result = behavior_deliver(self.world, obj, target, kb=self.kb)
        self._status(f"deliver({obj},{target})", result)
        if not result.is_ok:
            raise GiveUp(f"deliver({obj},{target}) failed with {result.kind}")
        if self.world.is_shelf(target):
            self.context.settle(obj)
            self.dialogue.say(f"I put the {obj} in its right shelf.")
        else:
            self.dialogue.say(f"Here is the {obj}.")

    def _say(self, text):
        self.dialogue.say(text)

    # recovery protocols

    def _recover(self, behavior, kind):
        """Run the recovery program with the error kind as pipe; True when it ends in recovered."""
        self.record("recovery", behavior=behavior, error=kind)
        if self.recovery is None:
            return False
        outcome = run_recovery(self.recovery, kind, self.kb, self.world, self.dialogue)
        self.traces.append(outcome)
        recovered = outcome.out_arg == Symbol("recovered")
        self.record("recovery_outcome", behavior=behavior,
                    outcome=print_term(outcome.out_arg) if outcome.out_arg is not None else None)
        return recovered

    # inference cycle

    def _distance(self, a, b):
        a = self.user if a == CLIENT else a
        b = self.user if b == CLIENT else b
        return self.world.distance(a, b)

    def _plan_locations(self):
        locations = {s.id: s.location for s in self.world.shelves}
        locations[CLIENT] = self.world.location_of(self.user)
        return locations

    def _goal_for(self, obj):
        for behavior, _ in self.queue:
            if name_of(behavior) == "deliver" and name_of(behavior.args[0]) == obj:
                target = name_of(behavior.args[1])
                return bring(obj) if target == self.user else place(obj, target)
        return bring(obj)

    def _drop_task(self, obj):
        """Drop queued plan steps, then the command's steps up to the delivery of obj."""
        while self.queue and self.queue[0][1] != _COMMAND:
            self.queue.popleft()
        if any(name_of(b) == "deliver" and name_of(b.args[0]) == obj for b, _ in self.queue):
            while self.queue:
                behavior, _ = self.queue.popleft()
                if name_of(behavior) == "deliver" and name_of(behavior.args[0]) == obj:
                    break

    def _inference_cycle(self, obj):
        self.cycles += 1
        goal = self._goal_for(obj)
        self.context.goal = goal
        self.record("inference_cycle", cycle=self.cycles, goal=goal.to_dict(),
                    previous_shelves=[[s, list(c)] for s, c in self.context.previous_shelves])
        logger.info(f"Inference cycle {self.cycles} for {goal}")
        if self.cycles > self.max_cycles:
            raise GiveUp(f"{self.max_cycles} inference cycles did not get the {obj}")
        self._drop_task(obj)
        diagnosis = None
        try:
            diagnosis = diagnose(self.last_observation, self.kb, self.world, self.context.previous_shelves,
                                 self.rng, obj)
        except NoUnseenShelves:
            goal = self._run_out(obj, goal)
            if goal is None:
                return
        else:
            self.record("diagnosis", **diagnosis.to_dict())
            self.dialogue.say(f"I think the {obj} was placed on {diagnosis.hypotheses[obj]}.")
        behaviors = self._decide_and_plan(goal, diagnosis)
        self.queue.extendleft(reversed([(b, f"plan{self.cycles}") for b in behaviors]))

    def _decide_and_plan(self, goal, diagnosis):
        pending = [o for o in self.context.pending if o.obj not in self.context.objects_placed]
        sources = {o.obj: o.source or self._source_of(o.obj, diagnosis) for o in [goal, *pending]}
        start = self.world.robot_at

        def cost_of(obligations):
            return obligations_cost(obligations, sources, self.cost_model, self._distance, start)

        decisions = decide(goal, pending, cost_of, self.context.r_max, self.maximize)
        self.record("decision", obligations=[o.to_dict() for o in decisions], cost=cost_of(decisions),
                    r_max=self.context.r_max)
        try:
            actions = plan(decisions, diagnosis, self.cost_model, distance=self._distance, start=start,
                           hands=(self.world.right_hand, self.world.left_hand), client_location=CLIENT,
                           locations=self._plan_locations())
        except NoPlan as e:
            raise GiveUp(str(e)) from e
        self.record("plan", actions=[print_term(a) for a in actions])
        return to_behaviors(actions, decisions, self.user)

    def _substitute(self, obj):
        value = self.kb.preferred_value(obj, "substitute")
        if isinstance(value, Symbol) and not self.kb.holds(value.name, "out_of_stock"):
            return value.name
        klass = self.kb.class_of(obj)
        for _, contents in self.context.previous_shelves:
            for other in contents:
                if other != obj and self.kb.taxonomy.is_individual(other) and self.kb.is_a(other, klass):
                    return other
        return None

    def _run_out(self, obj, goal):
        """No shelf is left to search: the object ran out. Returns the substitute's obligation or None."""
        self.kb.assert_clause(obj, "out_of_stock")
        self.record("run_out", object=obj)
        if goal.kind == "TO":
            return None
        substitute = self._substitute(obj)
        if substitute is None:
            self.dialogue.say(f"Sorry, we ran out of {obj}.")
            raise GiveUp(f"{obj} ran out and there is no substitute")
        source = next((s for s, contents in self.context.previous_shelves if substitute in contents),
                      self.kb.believed_location(substitute))
        self.offers.append(substitute)
        self.record("substitute", object=obj, substitute=substitute, source=source)
        self.dialogue.say(f"The supermarket ran out of {obj}. I will offer you the {substitute} instead.")
        return bring(substitute, source)

    def _source_of(self, obj, diagnosis):
        if diagnosis is not None and diagnosis.location_of(obj):
            return diagnosis.location_of(obj)
        return self.kb.believed_location(obj)
