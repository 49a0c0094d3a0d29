"""
Daily-life inference cycle: diagnosis, decision-making and planning.

Obligations are CO (bring an object to the client) or TO (put an object back
on its shelf). ``plan`` searches depth-first over interleavings of the
obligations' basic actions, pruning children that break the plan
preconditions.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from servicebot.errors import (
    BudgetTooSmall,
    NoPlan,
    NoUnseenShelves,
    ServiceBotError,
    UnknownActionKind,
    UnknownCommand,
)
from servicebot.utils.terms import (
    Compound,
    ListTerm,
    Number,
    Symbol,
    comp,
    name_of,
    parse_clauses,
    print_term,
)

logger = logging.getLogger(__name__)

ACTION_ORDER = ("move", "take", "search", "deliver")
CLIENT = "client"


@dataclass(frozen=True)
class Obligation:
    """
    CO: ``bring(o)``; TO: ``place(o, s_b)``.

    source is the shelf the object is believed to be on, when already known.
    """

    kind: str
    goal: object
    source: Optional[str] = None

    @property
    def obj(self):
        return name_of(self.goal.args[0])

    @property
    def destination(self):
        if self.kind == "TO":
            return name_of(self.goal.args[1])
        return CLIENT

    def to_dict(self):
        return {"kind": self.kind, "goal": print_term(self.goal), "source": self.source}

    def __str__(self):
        return f"{self.kind} {print_term(self.goal)}"


def bring(obj, source=None):
    return Obligation("CO", comp("bring", Symbol(obj)), source)


def place(obj, shelf, source=None):
    return Obligation("TO", comp("place", Symbol(obj), Symbol(shelf)), source)


@dataclass(frozen=True)
class Diagnosis:
    shelf_states: dict = field(default_factory=dict)
    assistant_actions: tuple = ()
    hypotheses: dict = field(default_factory=dict)

    def location_of(self, obj):
        for shelf, contents in self.shelf_states.items():
            if obj in contents:
                return shelf
        return None

    def to_dict(self):
        return {
            "shelf_states": {s: list(c) for s, c in self.shelf_states.items()},
            "assistant_actions": [print_term(a) for a in self.assistant_actions],
            "hypotheses": dict(self.hypotheses),
        }


@dataclass
class InferenceContext:
    goal: Optional[Obligation] = None
    previous_shelves: list = field(default_factory=list)
    objects_placed: set = field(default_factory=set)
    pending: list = field(default_factory=list)
    r_max: float = 0

    def known_states(self):
        return dict(self.previous_shelves)

    def remember_shelf(self, shelf, contents):
        """Record (or refresh) the known contents of an inspected shelf."""
        self.previous_shelves = [(s, c) for s, c in self.previous_shelves if s != shelf]
        self.previous_shelves.append((shelf, tuple(contents)))

    def settle(self, obj):
        self.objects_placed.add(obj)
        self.pending = [o for o in self.pending if o.obj != obj]


# Cost model ----------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """
    Time cost and success probability per action kind.

    For navigation kinds both are per distance unit: a move over distance d
    costs ``cost * d`` and succeeds with ``probability ** d``.
    """

    costs: dict = field(default_factory=dict)
    probabilities: dict = field(default_factory=dict)
    r_max: float = 100

    def check(self, kind):
        if kind not in self.costs:
            raise UnknownActionKind(f"no cost for action kind {kind!r}")


def load_cost_model(text, source=None):
    """
    Read ``action(Kind, Cost, SuccessPercent).`` and ``r_max(N).`` clauses.

    Returns:
        CostModel: Parsed model; probabilities are SuccessPercent / 100
    """
    costs, probabilities, r_max = {}, {}, None
    try:
        for clause in parse_clauses(text, source=source):
            if isinstance(clause, Compound) and clause.functor == "action" and clause.arity == 3:
                kind, cost, percent = clause.args
                if not (isinstance(cost, Number) and isinstance(percent, Number)):
                    raise UnknownActionKind(f"action costs and percentages are integers: {print_term(clause)}")
                if cost.value < 0 or not 0 < percent.value <= 100:
                    raise UnknownActionKind(f"cost must be >= 0 and percentage in (0, 100]: {print_term(clause)}")
                costs[name_of(kind)] = cost.value
                probabilities[name_of(kind)] = percent.value / 100
            elif isinstance(clause, Compound) and clause.functor == "r_max" and isinstance(clause.args[0], Number):
                r_max = clause.args[0].value
            else:
                raise UnknownActionKind(f"unexpected cost model clause {print_term(clause)}")
    except ServiceBotError as e:
        raise e.with_source(source)
    return CostModel(costs, probabilities, r_max if r_max is not None else 100)


def load_cost_model_file(path):
    path = Path(path)
    return load_cost_model(path.read_text(encoding="utf-8"), source=str(path))


def _target(action):
    return name_of(action.args[0]) if isinstance(action, Compound) else None


def is_navigation(action):
    """move(s) and search(client) take the robot somewhere; search(o) is an observation."""
    kind = name_of(action)
    return kind == "move" or (kind == "search" and _target(action) == CLIENT)


def plan_cost(actions, cost_model, distance=None, start=None):
    """
    Restriction cost of an action list: the sum of costs over the product of probabilities.

    Args:
        actions (list): Basic action terms
        cost_model (CostModel): Per-kind costs and probabilities
        distance (callable): Optional (a, b) -> distance for navigation actions
        start (str): Robot location before the first action

    Returns:
        float: 0 for an empty plan
    """
    if not actions:
        return 0
    total, probability = 0, 1.0
    here = start
    for action in actions:
        kind = name_of(action)
        cost_model.check(kind)
        if is_navigation(action) and distance is not None:
            target = _target(action)
            d = distance(here, target) if here is not None else 1
            here = target
            total += cost_model.costs[kind] * d
            probability *= cost_model.probabilities[kind] ** d
        else:
            total += cost_model.costs[kind]
            probability *= cost_model.probabilities[kind]
    return total / probability


def template(obligation, source):
    """Basic actions resolving one obligation."""
    obj = Symbol(obligation.obj)
    second = comp("move", Symbol(obligation.destination)) if obligation.kind == "TO" \
        else comp("search", Symbol(CLIENT))
    return [comp("move", Symbol(source)), comp("take", obj), second, comp("deliver", obj)]


def obligations_cost(obligations, sources, cost_model, distance=None, start=None):
    """Cost of a set of obligations: their templates costed back to back."""
    actions = []
    for obligation in obligations:
        actions.extend(template(obligation, obligation.source or sources[obligation.obj]))
    return plan_cost(actions, cost_model, distance, start)


# Decision-making -----------------------------------------------------------

def decide(goal, pending, cost_of, r_max, maximize=True):
    """
    Choose which pending obligations to take on together with goal.

    Every subset of pending is considered together with goal; the one whose
    cost is highest (lowest when maximize is False) without exceeding r_max
    wins. Ties go to fewer obligations, then declaration order.

    Args:
        goal (Obligation): The obligation that started the inference cycle
        pending (list): Pending obligations in declaration order
        cost_of (callable): list of obligations -> cost
        r_max (float): Cost budget

    Returns:
        list: goal first, then the chosen pending obligations in order

    Raises:
        BudgetTooSmall: when goal alone exceeds r_max
    """
    best = [goal]
    best_cost = cost_of(best)
    if best_cost > r_max:
        raise BudgetTooSmall(f"{goal} costs {best_cost:g}, more than r_max {r_max:g}")
    for size in range(1, len(pending) + 1):
        for chosen in itertools.combinations(pending, size):
            candidate = [goal, *chosen]
            cost = cost_of(candidate)
            if cost > r_max:
                continue
            if (cost > best_cost) if maximize else (cost < best_cost):
                best, best_cost = candidate, cost
    logger.info(f"Decision: {', '.join(str(o) for o in best)} (cost {best_cost:g}, r_max {r_max:g})")
    return best


# Diagnosis -----------------------------------------------------------------

def diagnose(observation, kb, world, previous_shelves, rng, sought):
    """
    Explain a failed search by the moves and placements of the human assistant.

    The sought object gets the double exception (not at the observed shelf,
    not at its class shelf) and is hypothesized on the closest unseen shelf;
    the other unaccounted objects go to unseen shelves at random.

    Args:
        observation (Observation): The failed observation
        kb (KBStore): Beliefs, updated with exceptions and hypotheses
        world (WorldState): Shelves, distances, hands and deliveries
        previous_shelves (list): (shelf, contents) of every inspected shelf
        rng (random.Random): Seeded generator for the random distribution
        sought (str): Object that was not found

    Returns:
        Diagnosis: Hypothesized shelf states and assistant actions

    Raises:
        NoUnseenShelves: when every shelf has been inspected
    """
    known = dict(previous_shelves)
    known[observation.shelf] = tuple(observation.observed)
    kb.believe_not_at(sought, observation.shelf)
    for shelf in world.shelves:
        if shelf.id != observation.shelf and kb.is_a(sought, shelf.klass) and shelf.id in known:
            kb.believe_not_at(sought, shelf.id)
    unseen = [s for s in world.shelves if s.id not in known]
    if not unseen:
        raise NoUnseenShelves(f"every shelf has been inspected and {sought} was not found")

    away = set(world.holding()) | {o for o, _ in world.delivered}
    universe = [
        ind for ind in kb.taxonomy.individual_index
        if ind not in away and any(kb.is_a(ind, s.klass) for s in world.shelves)
    ]
    placed = {o for contents in known.values() for o in contents}
    unseen_ids = [s.id for s in unseen]
    states = {s.id: list(known.get(s.id, ())) for s in world.shelves}
    loose = []
    for obj in universe:
        if obj in placed or obj == sought:
            continue
        believed = kb.believed_location(obj)
        if believed in unseen_ids:
            states[believed].append(obj)
        else:
            loose.append(obj)

    closest = min(unseen, key=lambda s: (world.distance(observation.shelf, s.id), unseen.index(s)))
    hypotheses = {sought: closest.id}
    states[closest.id].append(sought)
    for obj in loose:
        shelf = rng.choice(unseen_ids)
        hypotheses[obj] = shelf
        states[shelf].append(obj)
    for obj, shelf in hypotheses.items():
        kb.hypothesize_at(obj, shelf)

    actions = []
    for shelf in world.shelves:
        if states[shelf.id]:
            actions.append(comp("move", Symbol(shelf.id)))
            actions.extend(comp("place", Symbol(o)) for o in states[shelf.id])
    diagnosis = Diagnosis({s: tuple(c) for s, c in states.items()}, tuple(actions), hypotheses)
    logger.info(f"Diagnosis: {sought} hypothesized at {closest.id}; {len(loose)} other objects distributed")
    return diagnosis


# Planning ------------------------------------------------------------------

@dataclass(frozen=True)
class PlanNode:
    robot_at: Optional[str]
    right_hand: Optional[str] = None
    left_hand: Optional[str] = None
    remaining: tuple = ()
    actions: tuple = ()
    plan: tuple = ()
    score: float = 0

    def holding(self):
        return [o for o in (self.right_hand, self.left_hand) if o is not None]


@dataclass(frozen=True)
class _Layout:
    sources: dict
    destinations: dict
    cost_model: CostModel
    distance: object
    start: Optional[str]
    locations: dict = field(default_factory=dict)

    def at(self, name):
        """Location of a shelf id or the client; locations map to themselves."""
        return self.locations.get(name, name)


def _violation(node, action, layout):
    """Name of the first precondition action breaks from node, or None."""
    kind = name_of(action)
    target = _target(action)
    last = node.plan[-1] if node.plan else None
    if kind == "search" and target != CLIENT:
        if (last is not None and name_of(last) == "search") or len(node.holding()) == 2:
            return "useless observation"
    if is_navigation(action):
        if last is not None and is_navigation(last):
            return "consecutive navigation"
        if layout.at(target) == node.robot_at:
            return "navigation to the current location"
    if kind == "deliver":
        if target not in node.holding():
            return "delivery before taking"
        if node.robot_at != layout.at(layout.destinations[target]):
            return "delivery away from the destination"
    if kind == "take":
        if len(node.holding()) == 2:
            return "no free hand"
        if node.robot_at != layout.at(layout.sources[target]):
            return "take away from the source"
    return None


def _apply(node, index, action, layout, obligations):
    kind = name_of(action)
    target = _target(action)
    changes = {}
    if is_navigation(action):
        changes["robot_at"] = layout.at(target)
    elif kind == "take":
        hand = "right_hand" if node.right_hand is None else "left_hand"
        changes[hand] = target
    elif kind == "deliver":
        hand = "right_hand" if node.right_hand == target else "left_hand"
        changes[hand] = None
        changes["remaining"] = tuple(i for i in node.remaining if obligations[i].obj != target)
    plan = node.plan + (action,)
    changes["plan"] = plan
    changes["actions"] = node.actions[:index] + node.actions[index + 1:]
    changes["score"] = plan_cost(list(plan), layout.cost_model, layout.distance, layout.start)
    return replace(node, **changes)


def _layout(decisions, diagnosis, cost_model, distance, start, client_location, locations=None):
    sources, destinations = {}, {}
    for obligation in decisions:
        source = obligation.source or (diagnosis.location_of(obligation.obj) if diagnosis else None)
        if source is None:
            raise NoPlan(f"no source shelf known for {obligation.obj}")
        sources[obligation.obj] = source
        destinations[obligation.obj] = obligation.destination

    def plan_distance(a, b):
        a = client_location if a == CLIENT else a
        b = client_location if b == CLIENT else b
        return distance(a, b) if distance is not None else 1

    return _Layout(sources, destinations, cost_model, plan_distance if distance is not None else None, start,
                   dict(locations or {}))


def plan(decisions, diagnosis, cost_model, distance=None, start=None, hands=(None, None),
         client_location=None, locations=None, max_expansions=20000):
    """
    Depth-first search for an action list resolving every decided obligation.

    Children are ordered by the restriction cost of the extended plan, then
    by action kind, then by position in the action multiset.

    Args:
        decisions (list): Obligations to resolve
        diagnosis (Diagnosis): Source shelves for obligations without one
        cost_model (CostModel): Scores the partial plans
        distance (callable): (a, b) -> distance between locations
        start (str): Robot location
        hands (tuple): (right, left) objects already held
        client_location (str): Where search(client) takes the robot, for distances
        locations (dict): Shelf id (and client) -> location; ids not listed are their own location

    Returns:
        list: Basic action terms; [] when there is nothing to do

    Raises:
        NoPlan: when no interleaving satisfies the preconditions
    """
    if not decisions:
        return []
    layout = _layout(decisions, diagnosis, cost_model, distance, start, client_location, locations)
    actions = []
    for obligation in decisions:
        actions.extend(template(obligation, layout.sources[obligation.obj]))
    here = layout.at(start) if start else start
    root = PlanNode(here, hands[0], hands[1], tuple(range(len(decisions))), tuple(actions))
    frontier = [root]
    expansions = 0
    while frontier:
        node = frontier.pop()
        if not node.remaining:
            logger.info(f"Plan: {', '.join(print_term(a) for a in node.plan)} (score {node.score:g})")
            return list(node.plan)
        expansions += 1
        if expansions > max_expansions:
            break
        children = []
        seen = set()
        for index, action in enumerate(node.actions):
            if action in seen:
                continue
            seen.add(action)
            if _violation(node, action, layout) is not None:
                continue
            child = _apply(node, index, action, layout, decisions)
            children.append((child.score, ACTION_ORDER.index(name_of(action)), index, child))
        children.sort(key=lambda c: c[:3])
        frontier.extend(c[3] for c in reversed(children))
        logger.debug(f"Expanded plan node at {node.robot_at} with {len(children)} children")
    raise NoPlan(f"no plan for {', '.join(str(o) for o in decisions)}")


def check_plan(actions, decisions, diagnosis=None, start=None, hands=(None, None), locations=None):
    """
    Replay a plan against the preconditions.

    Returns:
        list: Problems found (empty when every prefix is valid and every obligation resolved)
    """
    unit = CostModel({k: 0 for k in ACTION_ORDER}, {k: 1.0 for k in ACTION_ORDER})
    layout = _layout(decisions, diagnosis, unit, None, start, None, locations)
    here = layout.at(start) if start else start
    node = PlanNode(here, hands[0], hands[1], tuple(range(len(decisions))), tuple(actions))
    problems = []
    for step, action in enumerate(actions, start=1):
        reason = _violation(node, action, layout)
        if reason:
            problems.append(f"step {step} {print_term(action)}: {reason}")
        node = _apply(node, 0, action, layout, decisions)
    if node.remaining:
        problems.append(f"unresolved: {', '.join(str(decisions[i]) for i in node.remaining)}")
    return problems


def to_behaviors(actions, decisions, client):
    """Turn basic actions into dispatcher behaviors; take(o) is preceded by find(o)."""
    destinations = {o.obj: (client if o.kind == "CO" else o.destination) for o in decisions}
    behaviors = []
    for action in actions:
        kind, target = name_of(action), _target(action)
        if kind == "move":
            behaviors.append(action)
        elif kind == "take":
            behaviors.extend([comp("find", Symbol(target)), action])
        elif kind == "search":
            behaviors.append(comp("find", Symbol(client if target == CLIENT else target)))
        elif kind == "deliver":
            behaviors.append(comp("deliver", Symbol(target), Symbol(destinations[target])))
    return behaviors


# GPSR ----------------------------------------------------------------------

def gpsr_interpret(utterance, user="user"):
    """
    Translate a structured command into the behaviors that carry it out.

    ``bring(o)``, ``place(o, s)`` and ``inspect(s)``; lists and ``and/2``
    concatenate. ``grasp(o)`` is expanded by the dispatcher.

    Raises:
        UnknownCommand: for anything else
    """
    if isinstance(utterance, ListTerm):
        return [b for part in utterance.elements for b in gpsr_interpret(part, user)]
    if isinstance(utterance, Compound) and utterance.functor == "and" and utterance.arity == 2:
        return gpsr_interpret(utterance.args[0], user) + gpsr_interpret(utterance.args[1], user)
    name = name_of(utterance)
    args = utterance.args if isinstance(utterance, Compound) else ()
    if name == "bring" and len(args) == 1:
        obj = args[0]
        return [Symbol("acknowledge"), comp("grasp", obj), comp("find", Symbol(user)),
                comp("deliver", obj, Symbol(user))]
    if name == "place" and len(args) == 2:
        obj, shelf = args
        return [Symbol("acknowledge"), comp("grasp", obj), comp("move", shelf), comp("deliver", obj, shelf)]
    if name == "inspect" and len(args) == 1:
        return [comp("move", args[0]), comp("see", args[0])]
    raise UnknownCommand(f"unknown command {print_term(utterance)}")
