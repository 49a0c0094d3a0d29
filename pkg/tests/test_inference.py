"""
unit tests for servicebot.services.inference
"""
import itertools
import random

from pytest import approx, mark, raises

from servicebot.errors import BudgetTooSmall, NoUnseenShelves, UnknownActionKind, UnknownCommand
from servicebot.services.inference import (
    CLIENT,
    CostModel,
    bring,
    check_plan,
    decide,
    diagnose,
    gpsr_interpret,
    load_cost_model,
    load_cost_model_file,
    obligations_cost,
    place,
    plan,
    plan_cost,
    to_behaviors,
)
from servicebot.services.kb_service import Verdict
from servicebot.services.world import Observation, load_scenario_file
from servicebot.utils.terms import comp, parse_term, print_term, sym

UNIT = CostModel({"move": 2, "take": 3, "search": 2, "deliver": 1},
                 {"move": 1.0, "take": 0.9, "search": 1.0, "deliver": 1.0}, 60)


def _actions(*terms):
    return [print_term(a) for a in terms]


def test_plan_cost():
    """plan_cost() - sum of costs over the product of probabilities"""
    model = CostModel({"a": 5, "b": 3, "c": 4}, {"a": 1.0, "b": 0.5, "c": 1.0})
    assert plan_cost([], model) == 0
    assert plan_cost([sym("a")], model) == 5
    assert plan_cost([sym("b"), sym("c")], model) == 14
    with raises(UnknownActionKind):
        plan_cost([sym("fly")], model)


def test_plan_cost_scales_navigation_by_distance():
    """plan_cost() - a move over distance d costs d times its unit cost"""
    model = CostModel({"move": 2}, {"move": 0.5})
    assert plan_cost([comp("move", sym("b"))], model, distance=lambda a, b: 3, start="a") == 6 / 0.125


def test_load_cost_model(data_dir):
    """load_cost_model_file() - percentages become probabilities"""
    model = load_cost_model_file(data_dir / "costs" / "supermarket.cm")
    assert model.costs == {"move": 2, "search": 2, "take": 3, "deliver": 1}
    assert model.probabilities["take"] == approx(0.9)
    assert model.r_max == 60


@mark.parametrize("text", ["action(move, 2, 0).", "action(move, -1, 50).", "cost(move, 2)."])
def test_load_cost_model_errors(text):
    """load_cost_model() - malformed clauses"""
    with raises(UnknownActionKind):
        load_cost_model(text, source="bad.cm")


def test_decide_examples():
    """decide() - the most work that fits in r_max"""
    goal, other = place("a", "s1"), place("b", "s2")
    costs = {"a": 5, "b": 4}

    def cost_of(obligations):
        return sum(costs[o.obj] for o in obligations)

    assert decide(goal, [], cost_of, 8) == [goal]
    assert decide(goal, [other], cost_of, 8) == [goal]
    assert decide(goal, [other], cost_of, 9) == [goal, other]
    assert decide(goal, [other], cost_of, 9, maximize=False) == [goal]
    with raises(BudgetTooSmall):
        decide(goal, [other], cost_of, 4)


def _oracle(goal, pending, cost_of, r_max):
    candidates = [[goal]]
    for size in range(1, len(pending) + 1):
        candidates.extend([goal, *chosen] for chosen in itertools.combinations(pending, size))
    feasible = [c for c in candidates if cost_of(c) <= r_max]
    return max(feasible, key=cost_of)


def test_decide_matches_exhaustive_enumeration():
    """decide() - random instances against brute-force subset enumeration"""
    rng = random.Random(11)
    for _ in range(200):
        size = rng.randint(0, 6)
        goal = place("goal", "s0")
        pending = [place(f"o{i}", f"s{i}") for i in range(size)]
        costs = {o.obj: rng.randint(1, 20) for o in [goal, *pending]}

        def cost_of(obligations):
            return sum(costs[o.obj] for o in obligations)

        r_max = rng.randint(1, 60)
        if costs["goal"] > r_max:
            with raises(BudgetTooSmall):
                decide(goal, pending, cost_of, r_max)
            continue
        assert decide(goal, pending, cost_of, r_max) == _oracle(goal, pending, cost_of, r_max)


def test_plan_single_client_obligation():
    """plan() - the bring template"""
    actions = plan([bring("coke", "shelf_drinks")], None, UNIT)
    assert _actions(*actions) == ["move(shelf_drinks)", "take(coke)", "search(client)", "deliver(coke)"]
    assert plan([], None, UNIT) == []


def test_plan_two_obligations_same_source():
    """plan() - a valid interleaving resolving both obligations"""
    decisions = [bring("coke", "shelf_bread"), place("malz", "shelf_drinks", "shelf_bread")]
    actions = plan(decisions, None, UNIT)
    assert check_plan(actions, decisions) == []
    assert len(actions) <= _shortest_plan(decisions) + 2


def _shortest_plan(decisions):
    """Breadth-first search over every precondition-respecting interleaving."""
    pool = []
    for o in decisions:
        second = comp("move", sym(o.destination)) if o.kind == "TO" else comp("search", sym(CLIENT))
        pool.extend([comp("move", sym(o.source)), comp("take", sym(o.obj)), second, comp("deliver", sym(o.obj))])
    level = [((), tuple(pool))]
    for length in range(1, len(pool) + 1):
        following = []
        for prefix, rest in level:
            for index, action in enumerate(rest):
                candidate = list(prefix) + [action]
                problems = check_plan(candidate, decisions)
                if not problems:
                    return length
                if all(p.startswith("unresolved") for p in problems):
                    following.append((tuple(candidate), rest[:index] + rest[index + 1:]))
        level = following
    return None


def test_plan_random_instances_are_valid():
    """plan() - random instances pass the precondition replay"""
    rng = random.Random(5)
    shelves = ["s1", "s2", "s3"]
    for n in range(200):
        decisions = []
        for i in range(rng.randint(1, 2)):
            source = rng.choice(shelves)
            if rng.random() < 0.5:
                decisions.append(bring(f"o{i}", source))
            else:
                decisions.append(place(f"o{i}", rng.choice([s for s in shelves if s != source]), source))
        actions = plan(decisions, None, UNIT)
        assert check_plan(actions, decisions) == []
        if n < 50:
            assert len(actions) <= _shortest_plan(decisions) + 2


def test_check_plan_reports_violations():
    """check_plan() - deliveries before taking and consecutive navigation"""
    decisions = [bring("coke", "s1")]
    problems = check_plan([comp("deliver", sym("coke"))], decisions)
    assert problems[0] == "step 1 deliver(coke): delivery before taking"
    problems = check_plan([comp("move", sym("s1")), comp("search", sym(CLIENT))], decisions)
    assert "consecutive navigation" in problems[0]


@mark.parametrize(
    "steps, decisions, problem",
    [
        (["deliver(coke)"], [bring("coke", "s1")], "step 1 deliver(coke): delivery before taking"),
        (["move(s1)", "move(s2)"], [bring("coke", "s1")], "step 2 move(s2): consecutive navigation"),
        (["move(s1)", "search(coke)", "search(coke)"], [bring("coke", "s1")],
         "step 3 search(coke): useless observation"),
        (["move(s1)", "take(coke)", "search(client)", "search(coke)"], [bring("coke", "s1")],
         "step 4 search(coke): useless observation"),
        (["move(s1)", "take(coke)", "take(malz)", "search(bolillo)"],
         [bring("coke", "s1"), bring("malz", "s1")], "step 4 search(bolillo): useless observation"),
        (["move(s1)", "take(a)", "take(b)", "take(c)"],
         [bring("a", "s1"), bring("b", "s1"), bring("c", "s1")], "step 4 take(c): no free hand"),
    ],
)
def test_check_plan_each_precondition(steps, decisions, problem):
    """check_plan() - a plan breaking one precondition is reported at the offending step"""
    problems = check_plan([parse_term(s) for s in steps], decisions)
    assert problems[0] == problem


def test_check_plan_object_search_is_not_navigation():
    """check_plan() - an observation between a move and a take keeps the robot in place"""
    steps = ["move(s1)", "search(coke)", "take(coke)", "search(client)", "deliver(coke)"]
    assert check_plan([parse_term(s) for s in steps], [bring("coke", "s1")]) == []


def test_plan_uses_shelf_locations():
    """plan() - a robot standing at a shelf's location takes from it without moving"""
    locations = {"sa": "aisle1", "sb": "aisle2", CLIENT: "counter"}
    actions = plan([bring("coke", "sa")], None, UNIT, start="aisle1", locations=locations)
    assert _actions(*actions) == ["take(coke)", "search(client)", "deliver(coke)"]
    assert check_plan(actions, [bring("coke", "sa")], start="aisle1", locations=locations) == []
    problems = check_plan(actions, [bring("coke", "sa")], start="aisle1")
    assert problems[0] == "step 1 take(coke): take away from the source"

    decisions = [place("malz", "sb", "sa")]
    actions = plan(decisions, None, UNIT, start="aisle2", locations=locations)
    assert _actions(*actions) == ["move(sa)", "take(malz)", "move(sb)", "deliver(malz)"]


def test_to_behaviors():
    """to_behaviors() - take is preceded by find; search(client) finds the user"""
    actions = plan([bring("coke", "s1")], None, UNIT)
    behaviors = to_behaviors(actions, [bring("coke", "s1")], "user")
    assert _actions(*behaviors) == ["move(s1)", "find(coke)", "take(coke)", "find(user)", "deliver(coke,user)"]


@mark.parametrize(
    "command, behaviors",
    [
        ("bring(coke)", ["acknowledge", "grasp(coke)", "find(user)", "deliver(coke,user)"]),
        ("place(coke, shelf_drinks)", ["acknowledge", "grasp(coke)", "move(shelf_drinks)",
                                       "deliver(coke,shelf_drinks)"]),
        ("inspect(shelf_bread)", ["move(shelf_bread)", "see(shelf_bread)"]),
        ("[inspect(s1), inspect(s2)]", ["move(s1)", "see(s1)", "move(s2)", "see(s2)"]),
    ],
)
def test_gpsr_interpret(command, behaviors):
    """gpsr_interpret() - commands to behaviors"""
    assert _actions(*gpsr_interpret(parse_term(command))) == behaviors


def test_gpsr_interpret_unknown():
    """gpsr_interpret() - anything else"""
    with raises(UnknownCommand):
        gpsr_interpret(comp("dance", sym("robot")))


def _supermarket(data_dir):
    return load_scenario_file(data_dir / "scenarios" / "supermarket.scn").world


def test_diagnose_closest_unseen_shelf(data_dir, supermarket_kb):
    """diagnose() - the sought object goes to the closest shelf not yet inspected"""
    world = _supermarket(data_dir)
    previous = [("shelf_bread", ("coke", "bolillo", "concha"))]
    observation = Observation("shelf_drinks", ("malz",))
    diagnosis = diagnose(observation, supermarket_kb, world, previous, random.Random(7), "heineken")
    assert diagnosis.hypotheses == {"heineken": "shelf_food"}
    assert diagnosis.shelf_states["shelf_bread"] == ("coke", "bolillo", "concha")
    assert diagnosis.shelf_states["shelf_drinks"] == ("malz",)
    assert set(diagnosis.shelf_states["shelf_food"]) == {"tortillas", "heineken"}
    placed = sorted(o for contents in diagnosis.shelf_states.values() for o in contents)
    assert placed == sorted(["heineken", "malz", "coke", "tortillas", "bolillo", "concha"])
    assert supermarket_kb.believed_location("heineken") == "shelf_food"
    assert supermarket_kb.ask("heineken", "loc=>shelf_drinks") == Verdict.NO


def test_diagnose_without_unseen_shelves(data_dir, supermarket_kb):
    """diagnose() - nothing left to search"""
    world = _supermarket(data_dir)
    previous = [("shelf_bread", ()), ("shelf_food", ("tortillas",))]
    with raises(NoUnseenShelves):
        diagnose(Observation("shelf_drinks", ("malz",)), supermarket_kb, world, previous, random.Random(7), "heineken")


def test_supermarket_decision_cost(data_dir):
    """obligations_cost() - heineken from food plus coke back to drinks"""
    world = _supermarket(data_dir)
    model = load_cost_model_file(data_dir / "costs" / "supermarket.cm")

    def distance(a, b):
        return world.distance("counter" if a == CLIENT else a, "counter" if b == CLIENT else b)

    goal = bring("heineken", "shelf_food")
    pending = [place("coke", "shelf_drinks", "shelf_bread")]

    def cost_of(obligations):
        return obligations_cost(obligations, {}, model, distance, "shelf_drinks")

    assert cost_of([goal]) == approx(20.0)
    assert cost_of([goal, *pending]) == approx(49.38, abs=0.01)
    assert decide(goal, pending, cost_of, model.r_max) == [goal, *pending]
