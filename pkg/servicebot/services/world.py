"""
Deterministic simulated world and behavior library.

WorldState is an immutable value threaded through behaviors: every behavior
returns the next state together with a BehaviorResult. Failures are status
values; WorldError is reserved for precondition violations and malformed
scenario files.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from servicebot.errors import ServiceBotError, WorldError
from servicebot.utils.terms import (
    Compound,
    ListTerm,
    Number,
    Symbol,
    as_term,
    comp,
    name_of,
    parse_clauses,
    print_term,
)

logger = logging.getLogger(__name__)

HANDS = ("right", "left")

# behavior -> error kinds it may report
ERROR_CATALOG = {
    "move": ("path_blocked", "door_closed"),
    "see": (),
    "take": ("not_found", "hands_full"),
    "deliver": ("not_held", "wrong_location"),
    "find": ("not_found",),
    "say": (),
    "ask": ("no_reply",),
}


@dataclass(frozen=True)
class BehaviorResult:
    status: str = "ok"
    kind: Optional[str] = None
    payload: object = None

    @classmethod
    def ok(cls, payload=None):
        return cls("ok", None, payload)

    @classmethod
    def error(cls, kind, payload=None):
        return cls("error", kind, payload)

    @property
    def is_ok(self):
        return self.status == "ok"

    def to_term(self):
        return Symbol("ok") if self.is_ok else comp("error", Symbol(self.kind))

    def to_dict(self):
        return {"status": self.status, "failure": self.kind,
                "payload": print_term(as_term(self.payload)) if self.payload is not None else None}


@dataclass(frozen=True)
class Shelf:
    id: str
    klass: str
    location: str


@dataclass(frozen=True)
class Observation:
    shelf: str
    observed: tuple = ()
    unseen: tuple = ()
    misplaced: tuple = ()
    missing: tuple = ()

    def to_dict(self):
        return {"shelf": self.shelf, "observed": list(self.observed), "unseen": list(self.unseen),
                "misplaced": list(self.misplaced), "missing": list(self.missing)}


@dataclass(frozen=True)
class WorldState:
    """
    Rooms, shelves, object placements, the robot and the people around it.

    An object is either placed on a shelf, held in a hand, or delivered.
    """

    locations: tuple = ()
    rooms: dict = field(default_factory=dict)
    shelves: tuple = ()
    distances: dict = field(default_factory=dict)
    placement: dict = field(default_factory=dict)
    robot_at: str = "welcome_point"
    right_hand: Optional[str] = None
    left_hand: Optional[str] = None
    delivered: tuple = ()
    people: dict = field(default_factory=dict)
    hand_overrides: dict = field(default_factory=dict)
    preferred_hand: str = "right"
    injections: dict = field(default_factory=dict)
    invocations: dict = field(default_factory=dict)
    hidden: frozenset = frozenset()
    rng_seed: int = 7

    def shelf(self, shelf_id):
        for s in self.shelves:
            if s.id == shelf_id:
                return s
        raise WorldError(f"unknown shelf {shelf_id!r}")

    def is_shelf(self, name):
        return any(s.id == name for s in self.shelves)

    def shelf_at(self, location):
        for s in self.shelves:
            if s.location == location:
                return s
        return None

    def location_of(self, name):
        """Location of a location, shelf or person name."""
        if name in self.locations:
            return name
        if self.is_shelf(name):
            return self.shelf(name).location
        if name in self.people:
            return self.people[name]
        raise WorldError(f"unknown location {name!r}")

    def distance(self, a, b):
        a, b = self.location_of(a), self.location_of(b)
        if a == b:
            return 0
        if (a, b) in self.distances:
            return self.distances[(a, b)]
        if (b, a) in self.distances:
            return self.distances[(b, a)]
        raise WorldError(f"no distance between {a} and {b}")

    def holding(self):
        return [o for o in (self.right_hand, self.left_hand) if o is not None]

    def hand_of(self, obj):
        if self.right_hand == obj:
            return "right"
        if self.left_hand == obj:
            return "left"
        return None

    def free_hands(self):
        return [h for h in HANDS if getattr(self, f"{h}_hand") is None]

    def objects_on(self, shelf_id):
        return [o for o, s in self.placement.items() if s == shelf_id]

    def objects(self):
        """Every object in the world: placed, held or delivered."""
        return list(self.placement) + self.holding() + [o for o, _ in self.delivered]

    def where_is(self, obj):
        if obj in self.placement:
            return self.placement[obj]
        hand = self.hand_of(obj)
        if hand:
            return f"{hand}_hand"
        for o, target in self.delivered:
            if o == obj:
                return f"delivered:{target}"
        return None

    def to_dict(self):
        return {
            "robot_at": self.robot_at,
            "right_hand": self.right_hand,
            "left_hand": self.left_hand,
            "placement": dict(self.placement),
            "delivered": [list(d) for d in self.delivered],
        }


def _invoke(w, behavior):
    """Count one invocation of behavior and pop the error injected for it, if any."""
    count = w.invocations.get(behavior, 0) + 1
    key = (behavior, count)
    kind = w.injections.get(key)
    injections = w.injections
    if kind is not None:
        injections = {k: v for k, v in w.injections.items() if k != key}
        logger.info(f"Injected error {kind} on {behavior} #{count}")
    return replace(w, invocations={**w.invocations, behavior: count}, injections=injections), kind


# Behaviors -----------------------------------------------------------------

def behavior_move(w, target):
    """
    Move the robot to a location, shelf or person.

    Args:
        w (WorldState): Current world
        target (str): Location, shelf or person name

    Returns:
        tuple: (WorldState, BehaviorResult)
    """
    location = w.location_of(target)
    w, injected = _invoke(w, "move")
    if injected:
        return w, BehaviorResult.error(injected, target)
    if w.robot_at == location:
        return w, BehaviorResult.ok(target)
    logger.debug(f"Robot moves {w.robot_at} -> {location}")
    return replace(w, robot_at=location), BehaviorResult.ok(target)


def behavior_see(w, kb, shelf_id):
    """
    Observe a whole shelf and reconcile the KB's beliefs with what is there.

    Every observed object gets last_seen at the shelf; objects believed here
    but not seen get a location exception; objects not of the shelf's class
    are marked misplaced.

    Args:
        w (WorldState): Current world; the robot must stand at the shelf
        kb (KBStore): Beliefs to reconcile
        shelf_id (str): Shelf to inspect

    Returns:
        tuple: (WorldState, Observation, list of notification strings)
    """
    shelf = w.shelf(shelf_id)
    if w.robot_at != shelf.location:
        raise WorldError(f"see({shelf_id}) while the robot is at {w.robot_at}")
    w, _ = _invoke(w, "see")
    observed = [o for o in w.objects_on(shelf_id) if o not in w.hidden]
    universe = [o for o in w.placement if kb.taxonomy.is_individual(o)]
    believed = {o: kb.believed_location(o) for o in universe}
    unseen = [o for o in universe if believed[o] == shelf_id and o not in observed]
    misplaced = [o for o in observed if kb.taxonomy.is_individual(o) and not kb.is_a(o, shelf.klass)]
    missing = [o for o in unseen if kb.is_a(o, shelf.klass)]
    notifications = []
    for o in observed:
        if not kb.taxonomy.is_individual(o):
            continue
        kb.believe_at(o, shelf_id)
        if believed.get(o) != shelf_id:
            notifications.append(f"exception: {o} at {shelf_id}")
        if o in misplaced:
            if not kb.holds(o, "misplaced"):
                kb.assert_clause(o, "misplaced")
                notifications.append(f"misplaced: {o} at {shelf_id}")
        elif kb.holds(o, "misplaced"):
            kb.retract_where(o, lambda wc: not wc.is_default and wc.clause.attribute == "misplaced")
    for o in unseen:
        kb.believe_not_at(o, shelf_id)
        notifications.append(f"exception: {o} not at {shelf_id}")
    observation = Observation(shelf_id, tuple(observed), tuple(unseen), tuple(misplaced), tuple(missing))
    for note in notifications:
        logger.info(f"see({shelf_id}): {note}")
    return w, observation, notifications


def choose_hand(w, obj):
    free = w.free_hands()
    wanted = w.hand_overrides.get(obj, w.preferred_hand)
    return wanted if wanted in free else free[0]


def behavior_take(w, kb, obj):
    """Grasp obj from the shelf the robot stands at; beliefs about its place are dropped."""
    w, injected = _invoke(w, "take")
    if injected:
        return w, BehaviorResult.error(injected, obj)
    if not w.free_hands():
        return w, BehaviorResult.error("hands_full", obj)
    shelf = w.shelf_at(w.robot_at)
    if shelf is None or w.placement.get(obj) != shelf.id or obj in w.hidden:
        return w, BehaviorResult.error("not_found", obj)
    hand = choose_hand(w, obj)
    placement = {o: s for o, s in w.placement.items() if o != obj}
    w = replace(w, placement=placement, **{f"{hand}_hand": obj})
    if kb is not None and kb.taxonomy.is_individual(obj):
        kb.believe_taken(obj)
    logger.debug(f"Took {obj} from {shelf.id} with the {hand} hand")
    return w, BehaviorResult.ok(hand)


def behavior_deliver(w, obj, target, kb=None):
    """Hand obj to a person or put it on a shelf; both need the robot there."""
    w, injected = _invoke(w, "deliver")
    if injected:
        return w, BehaviorResult.error(injected, obj)
    hand = w.hand_of(obj)
    if hand is None:
        return w, BehaviorResult.error("not_held", obj)
    if w.robot_at != w.location_of(target):
        return w, BehaviorResult.error("wrong_location", target)
    w = replace(w, **{f"{hand}_hand": None})
    if w.is_shelf(target):
        w = replace(w, placement={**w.placement, obj: target})
        if kb is not None and kb.taxonomy.is_individual(obj):
            kb.believe_at(obj, target)
            if kb.holds(obj, "misplaced") and kb.is_a(obj, w.shelf(target).klass):
                kb.retract_where(obj, lambda wc: not wc.is_default and wc.clause.attribute == "misplaced")
    else:
        w = replace(w, delivered=w.delivered + ((obj, target),))
    logger.debug(f"Delivered {obj} to {target}")
    return w, BehaviorResult.ok(target)


def behavior_find(w, target):
    """
    Look for a person (the robot goes where they are) or an object on the current shelf.

    Returns:
        tuple: (WorldState, BehaviorResult)
    """
    w, injected = _invoke(w, "find")
    if injected:
        return w, BehaviorResult.error(injected, target)
    if target in w.people:
        return replace(w, robot_at=w.people[target]), BehaviorResult.ok(w.people[target])
    shelf = w.shelf_at(w.robot_at)
    if shelf is not None and w.placement.get(target) == shelf.id and target not in w.hidden:
        return w, BehaviorResult.ok(shelf.id)
    return w, BehaviorResult.error("not_found", target)


def check_conservation(before, after):
    """True when the same objects exist in both states, each in exactly one place."""
    objects = after.objects()
    return len(objects) == len(set(objects)) and sorted(objects) == sorted(before.objects())


# Dialogue channel ----------------------------------------------------------

@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str
    act: str
    term: object = None

    def to_dict(self):
        return {"speaker": self.speaker, "text": self.text, "act": self.act,
                "term": print_term(self.term) if self.term is not None else None}


class ScriptedReplies:
    """User replies read from the scenario script, in order."""

    def __init__(self, replies=()):
        self._replies = list(replies)
        self._next = 0

    @property
    def remaining(self):
        return len(self._replies) - self._next

    def __call__(self, question):
        if self._next >= len(self._replies):
            return None
        reply = self._replies[self._next]
        self._next += 1
        return reply


class Dialogue:
    """
    Ask-channel shared by the flows: say/ask behaviors plus the transcript.

    Args:
        replies (callable): question text -> (term, text) or None when no reply is left
        robot (str): Speaker name for the robot's turns
        user (str): Speaker name for the user's turns
        listener (callable): Called with every Utterance as it is added
    """

    def __init__(self, replies=None, robot="robot", user="user", listener=None):
        self.replies = replies or ScriptedReplies()
        self.robot = robot
        self.user = user
        self.listener = listener
        self.transcript = []

    def _turn(self, utterance):
        self.transcript.append(utterance)
        if self.listener is not None:
            self.listener(utterance)

    def say(self, text):
        self._turn(Utterance(self.robot, text, "say"))
        logger.info(f"{self.robot}: {text}")
        return BehaviorResult.ok(text)

    def ask(self, text):
        self._turn(Utterance(self.robot, text, "ask"))
        logger.info(f"{self.robot}: {text}")
        reply = self.replies(text)
        if reply is None:
            logger.warning(f"No reply to {text!r}")
            return BehaviorResult.error("no_reply", text)
        term, said = reply
        self._turn(Utterance(self.user, said, "reply", term))
        logger.info(f"{self.user}: {said}")
        return BehaviorResult.ok(term)

    def is_balanced(self):
        """Every question is followed by exactly one reply before the next robot turn."""
        pending = False
        for turn in self.transcript:
            if turn.act == "reply":
                if not pending:
                    return False
                pending = False
            elif pending:
                return False
            elif turn.act == "ask":
                pending = True
        return not pending

    def robot_lines(self):
        return [u.text for u in self.transcript if u.speaker == self.robot]


def behavior_say(dialogue, text):
    return dialogue.say(text)


def behavior_ask(dialogue, text):
    return dialogue.ask(text)


# Scenario files ------------------------------------------------------------

@dataclass
class Scenario:
    name: str
    world: WorldState
    flow: str = "gpsr"
    seed: Optional[int] = None
    kb: Optional[str] = None
    programs: list = field(default_factory=list)
    cost_model: Optional[str] = None
    commands: list = field(default_factory=list)
    replies: list = field(default_factory=list)
    preference_items: list = field(default_factory=list)
    pipe: object = None
    user: str = "user"
    source: Optional[str] = None


def _atom(term, where):
    name = name_of(term)
    if not isinstance(term, Symbol):
        raise WorldError(f"{where}: name expected, got {print_term(term)}")
    return name


def _int(term, where):
    if not isinstance(term, Number):
        raise WorldError(f"{where}: integer expected, got {print_term(term)}")
    return term.value


def _reply(clause):
    term = clause.args[0]
    text = clause.args[1].name if clause.arity > 1 and isinstance(clause.args[1], Symbol) else print_term(term)
    return term, text


def load_scenario(text, source=None, default_hand="right"):
    """
    Read a scenario file: one fact per clause.

    Recognized facts: name/1, flow/1, seed/1, kb/1, program/1, cost_model/1,
    room/1, location/1-2, shelf/2-3, distance/3, place/2, robot_at/1,
    person/2, user/1, hand/2, preferred_hand/1, inject/3, hidden/1,
    command/1, reply/1-2, items/1 and pipe/1.

    Returns:
        Scenario: Parsed scenario with its initial WorldState
    """
    try:
        clauses = parse_clauses(text, source=source)
    except ServiceBotError as e:
        raise e.with_source(source)
    facts = {"locations": [], "rooms": {}, "shelves": [], "distances": {}, "placement": {}, "people": {},
             "hand_overrides": {}, "injections": {}, "hidden": set()}
    scenario = Scenario(name=Path(source).stem if source else "scenario", world=WorldState(), source=source)
    robot_at = None
    preferred_hand = default_hand
    try:
        for clause in clauses:
            where = print_term(clause)
            if not isinstance(clause, Compound):
                raise WorldError(f"unknown scenario fact {where}")
            f, args = clause.functor, clause.args
            if f == "name":
                scenario.name = _atom(args[0], where)
            elif f == "flow":
                scenario.flow = _atom(args[0], where)
            elif f == "seed":
                scenario.seed = _int(args[0], where)
            elif f == "kb":
                scenario.kb = _atom(args[0], where)
            elif f == "program":
                scenario.programs.append(_atom(args[0], where))
            elif f == "cost_model":
                scenario.cost_model = _atom(args[0], where)
            elif f == "room":
                facts["rooms"].setdefault(_atom(args[0], where), [])
            elif f == "location":
                location = _atom(args[0], where)
                facts["locations"].append(location)
                if len(args) > 1:
                    facts["rooms"].setdefault(_atom(args[1], where), []).append(location)
            elif f == "shelf":
                shelf_id = _atom(args[0], where)
                location = _atom(args[2], where) if len(args) > 2 else shelf_id
                facts["shelves"].append(Shelf(shelf_id, _atom(args[1], where), location))
                if location not in facts["locations"]:
                    facts["locations"].append(location)
            elif f == "distance":
                facts["distances"][(_atom(args[0], where), _atom(args[1], where))] = _int(args[2], where)
            elif f == "place":
                facts["placement"][_atom(args[0], where)] = _atom(args[1], where)
            elif f == "robot_at":
                robot_at = _atom(args[0], where)
            elif f == "person":
                facts["people"][_atom(args[0], where)] = _atom(args[1], where)
            elif f == "user":
                scenario.user = _atom(args[0], where)
            elif f == "hand":
                facts["hand_overrides"][_atom(args[0], where)] = _atom(args[1], where)
            elif f == "preferred_hand":
                preferred_hand = _atom(args[0], where)
            elif f == "inject":
                facts["injections"][(_atom(args[0], where), _int(args[1], where))] = _atom(args[2], where)
            elif f == "hidden":
                facts["hidden"].add(_atom(args[0], where))
            elif f == "command":
                scenario.commands.append(args[0])
            elif f == "reply":
                scenario.replies.append(_reply(clause))
            elif f == "pipe":
                scenario.pipe = args[0]
            elif f == "items":
                if not isinstance(args[0], ListTerm):
                    raise WorldError(f"{where}: items takes a list")
                scenario.preference_items.append([_atom(t, where) for t in args[0].elements])
            else:
                raise WorldError(f"unknown scenario fact {where}")
        shelf_ids = {s.id for s in facts["shelves"]}
        for obj, shelf_id in facts["placement"].items():
            if shelf_id not in shelf_ids:
                raise WorldError(f"{obj} placed on unknown shelf {shelf_id}")
        for (a, b), d in facts["distances"].items():
            if d < 0:
                raise WorldError(f"negative distance between {a} and {b}")
        if preferred_hand not in HANDS:
            raise WorldError(f"preferred_hand must be right or left, got {preferred_hand}")
        scenario.world = WorldState(
            locations=tuple(facts["locations"]),
            rooms=facts["rooms"],
            shelves=tuple(facts["shelves"]),
            distances=facts["distances"],
            placement=facts["placement"],
            robot_at=robot_at or (facts["locations"][0] if facts["locations"] else "welcome_point"),
            people=facts["people"],
            hand_overrides=facts["hand_overrides"],
            preferred_hand=preferred_hand,
            injections=facts["injections"],
            hidden=frozenset(facts["hidden"]),
            rng_seed=scenario.seed if scenario.seed is not None else WorldState.rng_seed,
        )
    except ServiceBotError as e:
        raise e.with_source(source)
    logger.info(f"Loaded scenario {scenario.name}: {len(scenario.world.shelves)} shelves, "
                f"{len(scenario.world.placement)} objects")
    return scenario


def load_scenario_file(path, default_hand="right"):
    path = Path(path)
    return load_scenario(path.read_text(encoding="utf-8"), source=str(path), default_hand=default_hand)
