"""
Home-assistant flows driven by the user's preferences.

The robot elicits preferences pairwise, resolves an order against them,
fetches the items walking each object's preferred locations, and afterwards
reconciles what it saw with what the KB predicts. ``HOME_FUNCTIONS`` exposes
the flows to ``home.sitlog``.
"""

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

from servicebot.errors import FlowError, GiveUp, UnresolvableRequest
from servicebot.services.dispatcher import RECOVERABLE, run_recovery
from servicebot.services.kb_service import Literal
from servicebot.services.world import (
    behavior_deliver,
    behavior_find,
    behavior_move,
    behavior_see,
    behavior_take,
    choose_hand,
)
from servicebot.utils.terms import Compound, ListTerm, Symbol, comp, name_of, print_term

logger = logging.getLogger(__name__)

YES_NO = ("yes", "no")


@dataclass(frozen=True)
class OrderItem:
    requested: str
    resolved: str
    source: str = "direct"

    def to_dict(self):
        return {"requested": self.requested, "resolved": self.resolved, "source": self.source}


@dataclass(frozen=True)
class FetchPlanEntry:
    object: str
    location_order: tuple
    found_at: Optional[str] = None
    visited: tuple = ()

    def to_dict(self):
        return {"object": self.object, "location_order": list(self.location_order),
                "found_at": self.found_at, "visited": list(self.visited)}


@dataclass
class DeliveryRecord:
    entries: list = field(default_factory=list)
    delivered: list = field(default_factory=list)
    observed: dict = field(default_factory=dict)
    room: Optional[str] = None

    def to_dict(self):
        return {
            "entries": [e.to_dict() for e in self.entries],
            "delivered": [list(d) for d in self.delivered],
            "observed": dict(self.observed),
            "room": self.room,
        }


def _display(kb, name):
    if kb.taxonomy.is_individual(name):
        value = kb.preferred_value(name, "name")
        if isinstance(value, Symbol):
            return value.name
    return name


def ask_choice(dialogue, question, options, default):
    """
    Ask a question whose answer must be one of options.

    An unrecognized reply re-asks once; after that the default is taken.

    Raises:
        FlowError: when the user gives no reply at all
    """
    for _ in range(2):
        result = dialogue.ask(question)
        if not result.is_ok:
            raise FlowError(f"no reply to {question!r}")
        answer = name_of(result.payload)
        if answer in options:
            return answer
        logger.warning(f"Unexpected reply {print_term(result.payload)} to {question!r}")
    return default


# Eliciting preferences -----------------------------------------------------

def elicit_preferences(kb, dialogue, items):
    """
    Rank items of one class by asking the user about every pair.

    Each item gets a class-level ``'-'=>>to_serve=>item`` default; the most
    preferred gets weight 1. Ties in wins keep declaration order.

    Args:
        kb (KBStore): Store to update
        dialogue (Dialogue): Ask-channel
        items (list): Individuals of the same class

    Returns:
        dict: item -> weight
    """
    if not items:
        return {}
    klass = kb.class_of(items[0])
    if any(kb.class_of(o) != klass for o in items):
        raise FlowError(f"items to rank must share a class: {', '.join(items)}")
    wins = {o: 0 for o in items}
    for a, b in itertools.combinations(items, 2):
        wins[ask_choice(dialogue, f"What do you like best: {a} or {b}?", (a, b), a)] += 1
    ranking = sorted(items, key=lambda o: (-wins[o], items.index(o)))
    kb.retract_where(klass, lambda wc: wc.is_default and wc.clause.consequent.attribute == "to_serve")
    weights = {}
    for weight, item in enumerate(ranking, start=1):
        kb.assert_clause(klass, comp("=>>", Symbol("-"), comp("=>", Symbol("to_serve"), Symbol(item))), weight)
        weights[item] = weight
    if len(items) > 1:
        dialogue.say("Great! I will recall your choice!")
    logger.info(f"Preferences for {klass}: {weights}")
    return weights


# Taking the order ----------------------------------------------------------

def build_final_list(requests, kb, dialogue):
    """
    Resolve the requested objects and classes into the final list.

    A class is resolved to its preferred member to serve. An object that is
    not its class's preferred member makes the robot offer the preferred one.

    Args:
        requests (list): Object or class ids
        kb (KBStore): Preferences
        dialogue (Dialogue): Ask-channel for the confirmations

    Returns:
        list: OrderItem per kept request

    Raises:
        UnresolvableRequest: for names that are neither objects nor classes with a preferred member
    """
    final = []
    for request in requests:
        if kb.taxonomy.is_class(request):
            value = kb.preferred_value(request, "to_serve")
            if not isinstance(value, Symbol) or not kb.is_a(value.name, request):
                raise UnresolvableRequest(f"no preferred {request} to serve")
            answer = ask_choice(dialogue, f"Ok. I will bring you {value.name}, your favorite {request}.",
                                YES_NO, "yes")
            if answer == "yes":
                final.append(OrderItem(request, value.name, "preferred"))
        elif kb.taxonomy.is_individual(request):
            value = kb.preferred_value(kb.class_of(request), "to_serve")
            preferred = value.name if isinstance(value, Symbol) else None
            if preferred is None or preferred == request:
                final.append(OrderItem(request, request, "direct"))
                continue
            answer = ask_choice(
                dialogue,
                f"But you like {preferred} better than {request}! Shall I bring you the {request}?",
                (*YES_NO, request, preferred), "yes",
            )
            if answer in ("yes", request):
                final.append(OrderItem(request, request, "direct"))
            else:
                final.append(OrderItem(request, preferred, "confirmed-switch"))
        else:
            raise UnresolvableRequest(f"no object or class named {request!r}")
    if final:
        dialogue.say(f"Ok. I will bring you the {' and the '.join(i.resolved for i in final)}.")
    logger.info(f"Final list: {[i.resolved for i in final]}")
    return final


# Fetching ------------------------------------------------------------------

def _move(world, kb, dialogue, target, recovery=None):
    world, result = behavior_move(world, target)
    if result.is_ok:
        return world
    logger.warning(f"move({target}) failed: {result.kind}")
    if recovery is not None and result.kind in RECOVERABLE:
        outcome = run_recovery(recovery, result.kind, kb, world, dialogue)
        if outcome.out_arg == Symbol("recovered"):
            world, result = behavior_move(world, target)
            if result.is_ok:
                return world
    raise GiveUp(f"move({target}) failed with {result.kind}")


def _take(world, kb, dialogue, obj):
    dialogue.say(f"Attempting to grab the {obj} with my {choose_hand(world, obj)} arm.")
    world, result = behavior_take(world, kb, obj)
    if not result.is_ok:
        raise GiveUp(f"take({obj}) failed with {result.kind}")
    dialogue.say(f"I took the {obj}.")
    return world


def _fetch_one(world, kb, dialogue, obj, record, recovery=None):
    """Walk obj's preferred locations, re-read after every look, until it is seen; then take it."""
    entry = FetchPlanEntry(obj, tuple(kb.location_order(obj)))
    visited = []
    while True:
        remaining = [loc for loc in kb.location_order(obj) if loc not in visited and world.is_shelf(loc)]
        if not remaining:
            raise GiveUp(f"the {obj} was not found on any shelf")
        shelf = remaining[0]
        world = _move(world, kb, dialogue, shelf, recovery)
        world, observation, _ = behavior_see(world, kb, shelf)
        visited.append(shelf)
        for seen in observation.observed:
            record.observed[seen] = shelf
        if obj in observation.observed:
            break
        dialogue.say(f"The {obj} is not in {_display(kb, shelf)}.")
    world = _take(world, kb, dialogue, obj)
    record.entries.append(replace(entry, found_at=shelf, visited=tuple(visited)))
    return world, shelf


def _deliver_to_user(world, kb, dialogue, user, held, record, recovery=None):
    value = kb.preferred_value(user, "found_in") if kb.taxonomy.is_individual(user) else None
    room = value.name if isinstance(value, Symbol) else world.people.get(user)
    record.room = room
    logger.info(f"Looking for {user} in {room}")
    world = _move(world, kb, dialogue, room, recovery)
    world, result = behavior_find(world, user)
    if not result.is_ok:
        raise GiveUp(f"{user} is nowhere to be found")
    for obj, found_at in reversed(held):
        world, result = behavior_deliver(world, obj, user, kb=kb)
        if not result.is_ok:
            raise GiveUp(f"deliver({obj},{user}) failed with {result.kind}")
        dialogue.say(f"Here is the {obj}.")
        record.delivered.append((obj, found_at))
    return world


def fetch_items(items, world, kb, dialogue, user="user", recovery=None):
    """
    Fetch the final list and hand it to the user.

    Deliveries happen when both hands are full or nothing is left to take;
    the user is sought in the room their preferences point to.

    Args:
        items (list): OrderItem list
        world (WorldState): Current world
        kb (KBStore): Beliefs; every look updates last_seen of what was observed
        dialogue (Dialogue): Ask-channel
        user (str): Person to deliver to
        recovery (Program): Optional recovery protocol for failed moves

    Returns:
        tuple: (WorldState, DeliveryRecord)
    """
    if not items:
        raise FlowError("nothing to fetch")
    record = DeliveryRecord()
    pending = [i.resolved for i in items]
    held = []
    while pending:
        obj = pending.pop(0)
        dialogue.say(f"I will get the {obj}.")
        world, found_at = _fetch_one(world, kb, dialogue, obj, record, recovery)
        held.append((obj, found_at))
        if not world.free_hands() or not pending:
            world = _deliver_to_user(world, kb, dialogue, user, held, record, recovery)
            held = []
    return world, record


# Reconciling ---------------------------------------------------------------

def _preferred_weight(kb, obj, shelf):
    """Weight of the unconditional location default that made shelf the predefined one."""
    target = Literal("loc", Symbol(shelf))
    for node in kb.taxonomy.path(obj):
        for wc in node.props:
            if wc.is_default and not wc.clause.antecedents and wc.clause.consequent == target:
                return wc.weight
    return 1


def _cause(explanation):
    if not explanation.antecedents:
        return None
    first = explanation.antecedents[0]
    return name_of(first.value) if first.value is not None else first.attribute


def relocate(world, kb, dialogue, obj, source, destination, user, recovery=None):
    """Carry obj from source to its destination shelf and go back to the user."""
    world = _move(world, kb, dialogue, source, recovery)
    world = _take(world, kb, dialogue, obj)
    world = _move(world, kb, dialogue, destination, recovery)
    world, result = behavior_deliver(world, obj, destination, kb=kb)
    if not result.is_ok:
        raise GiveUp(f"deliver({obj},{destination}) failed with {result.kind}")
    dialogue.say(f"I put the {obj} in its right shelf.")
    if user in world.people:
        world = _move(world, kb, dialogue, user, recovery)
    return world


def reconcile_after_delivery(world, kb, dialogue, record, user="user", recovery=None):
    """
    Compare where things were found with where the KB expects them.

    Delivered objects taken away from their predefined shelf lead to an
    offer to change the preference. Other objects seen away from their
    predefined shelf are marked misplaced, explained by abduction and, on
    consent, carried back.

    Returns:
        tuple: (WorldState, list of update dicts)
    """
    updates = []
    requested = {obj for obj, _ in record.delivered}
    for obj, found_at in record.delivered:
        predefined = kb.predefined_location(obj)
        if predefined is None or predefined == found_at:
            continue
        question = (f"I found the {obj} in {_display(kb, found_at)} but it should be in "
                    f"{_display(kb, predefined)}; do you want me to change the preferred location of "
                    f"{obj} to {_display(kb, found_at)}?")
        if ask_choice(dialogue, question, YES_NO, "no") != "yes":
            continue
        weight = _preferred_weight(kb, obj, predefined)
        kb.assert_clause(obj, comp("=>>", Symbol("-"), comp("=>", Symbol("loc"), Symbol(found_at))), weight)
        updates.append({"kind": "preference", "object": obj, "loc": found_at, "weight": weight})
        dialogue.say("Ok. I updated my KB with your new preference.")

    all_placed = True
    for obj, seen_at in record.observed.items():
        if obj in requested or not kb.taxonomy.is_individual(obj):
            continue
        last = kb.value_of(obj, "last_seen")
        last = last.name if isinstance(last, Symbol) else seen_at
        predefined = kb.predefined_location(obj)
        if predefined is None or predefined == last:
            continue
        kb.assert_clause(obj, "misplaced")
        explanation = kb.abduce(obj, "misplaced")
        cause = _cause(explanation) if explanation else None
        updates.append({"kind": "misplaced", "object": obj, "at": last, "cause": cause,
                        "explanation": print_term(explanation.to_term()) if explanation else None})
        dialogue.say(f"I also noticed that the {obj} is not in its right place.")
        if cause:
            dialogue.say(f"I think that the explanation for this is that the {obj} was misplaced there by your {cause}.")
        if ask_choice(dialogue, "Do you want me to take it to its right shelf?", YES_NO, "no") != "yes":
            all_placed = False
            continue
        dialogue.say(f"Ok. I will take it to {_display(kb, predefined)}.")
        world = relocate(world, kb, dialogue, obj, last, predefined, user, recovery)
        updates.append({"kind": "relocated", "object": obj, "from": last, "to": predefined})
    if all_placed:
        dialogue.say("All the objects are placed in their right shelves.")
    else:
        dialogue.say("Some objects are still out of their shelves.")
    return world, updates


# home.sitlog user functions ------------------------------------------------

class HomeSession:
    """State the home program's user functions share across situations."""

    def __init__(self, world, kb, dialogue, user="user", preference_items=(), recovery=None, events=None):
        self.world = world
        self.kb = kb
        self.dialogue = dialogue
        self.user = user
        self.preference_items = [list(items) for items in preference_items]
        self.recovery = recovery
        self.order = []
        self.record = None
        self.events = events if events is not None else []

    def record_event(self, kind, **payload):
        self.events.append({"kind": kind, **payload})
        logger.debug(f"{kind}: {payload}")


def _session(ctx):
    return ctx.services["session"]


def _request_names(term):
    if isinstance(term, Compound) and term.functor in ("bring", "and"):
        return [n for arg in term.args for n in _request_names(arg)]
    if isinstance(term, ListTerm):
        return [n for element in term.elements for n in _request_names(element)]
    return [name_of(term)]


def elicit_next(ctx):
    session = _session(ctx)
    while session.preference_items:
        items = session.preference_items.pop(0)
        weights = elicit_preferences(session.kb, session.dialogue, items)
        session.record_event("preferences", items=items, weights=weights)
    return "ok"


def note_user(ctx, fact):
    session = _session(ctx)
    session.kb.assert_clause(session.user, fact)
    session.record_event("user_fact", fact=print_term(fact))
    return "ok"


def take_order(ctx, request):
    session = _session(ctx)
    session.order = build_final_list(_request_names(request), session.kb, session.dialogue)
    session.record_event("order", request=print_term(request), items=[i.to_dict() for i in session.order])
    if any(session.kb.is_a(i.resolved, "comestible") for i in session.order):
        note_user(ctx, Symbol("asked_comestible"))
    return ListTerm(tuple(Symbol(i.resolved) for i in session.order))


def fetch_order(ctx):
    session = _session(ctx)
    session.world, session.record = fetch_items(session.order, session.world, session.kb, session.dialogue,
                                                session.user, session.recovery)
    session.record_event("fetch", **session.record.to_dict())
    return Symbol(session.record.room)


def reconcile_task(ctx):
    session = _session(ctx)
    session.world, updates = reconcile_after_delivery(session.world, session.kb, session.dialogue,
                                                      session.record, session.user, session.recovery)
    for update in updates:
        session.record_event(update["kind"], **{k: v for k, v in update.items() if k != "kind"})
    return len(updates)


HOME_FUNCTIONS = {
    "elicit_next": elicit_next,
    "note_user": note_user,
    "take_order": take_order,
    "fetch_order": fetch_order,
    "reconcile_task": reconcile_task,
}
