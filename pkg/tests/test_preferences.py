"""
unit tests for servicebot.services.preferences
"""
from dataclasses import replace

from pytest import mark, raises

from servicebot.errors import FlowError, GiveUp, UnresolvableRequest
from servicebot.services.preferences import (
    OrderItem,
    ask_choice,
    build_final_list,
    elicit_preferences,
    fetch_items,
)
from servicebot.services.scenario_service import EXIT_DONE, ScenarioService
from servicebot.services.world import Dialogue, ScriptedReplies, load_scenario_file
from servicebot.utils.terms import parse_term, sym


def _dialogue(*answers):
    return Dialogue(ScriptedReplies([(parse_term(a), a) for a in answers]))


def _of(outcome, kind):
    return [{k: v for k, v in e.items() if k != "kind"} for e in outcome.events if e["kind"] == kind]


def test_home_run(data_dir):
    """run() - preferences, order, fetch and reconciliation in the home flow"""
    loaded = ScenarioService.load("home", data_dir)
    outcome = ScenarioService.run(loaded)
    assert outcome.exit_code == EXIT_DONE
    assert outcome.out_arg == sym("living_room")

    assert _of(outcome, "preferences") == [
        {"items": ["malz", "coke"], "weights": {"malz": 1, "coke": 2}},
        {"items": ["noodles", "bisquits"], "weights": {"noodles": 1, "bisquits": 2}},
    ]
    assert [f["fact"] for f in _of(outcome, "user_fact")] == ["back_from_work", "bad_day", "asked_comestible"]
    assert _of(outcome, "order")[0]["items"] == [
        {"requested": "drink", "resolved": "malz", "source": "preferred"},
        {"requested": "bisquits", "resolved": "noodles", "source": "confirmed-switch"},
    ]

    fetch = _of(outcome, "fetch")[0]
    assert [(e["object"], e["found_at"], e["visited"]) for e in fetch["entries"]] == [
        ("malz", "shelf_drinks", ["shelf_drinks"]),
        ("noodles", "shelf_snacks", ["shelf_food", "shelf_snacks"]),
    ]
    assert fetch["delivered"] == [["noodles", "shelf_snacks"], ["malz", "shelf_drinks"]]
    assert fetch["room"] == "living_room"

    assert _of(outcome, "preference") == [{"object": "noodles", "loc": "shelf_snacks", "weight": 2}]
    misplaced = _of(outcome, "misplaced")[0]
    assert (misplaced["object"], misplaced["at"], misplaced["cause"]) == ("coke", "shelf_snacks", "child")
    assert _of(outcome, "relocated") == [{"object": "coke", "from": "shelf_snacks", "to": "shelf_drinks"}]

    kb, world = outcome.kb, outcome.world
    assert kb.location_order("noodles")[0] == "shelf_snacks"
    assert world.placement["coke"] == "shelf_drinks"
    assert sorted(world.delivered) == [("malz", "user"), ("noodles", "user")]
    lines = outcome.dialogue.robot_lines()
    assert "The noodles is not in the shelf of food." in lines
    assert "All the objects are placed in their right shelves." in lines
    assert lines[-2:] == ["The task is finished.", "Good bye."]
    assert outcome.dialogue.is_balanced()


def test_elicit_preferences(home_kb):
    """elicit_preferences() - the pairwise winner is served first"""
    weights = elicit_preferences(home_kb, _dialogue("coke"), ["malz", "coke"])
    assert weights == {"coke": 1, "malz": 2}
    assert home_kb.preferred_value("drink", "to_serve") == sym("coke")


def test_elicit_preferences_replaces_earlier_ranking(home_kb):
    """elicit_preferences() - a new ranking drops the old to_serve defaults"""
    elicit_preferences(home_kb, _dialogue("coke"), ["malz", "coke"])
    elicit_preferences(home_kb, _dialogue("malz"), ["malz", "coke"])
    assert home_kb.preferred_value("drink", "to_serve") == sym("malz")


def test_elicit_preferences_mixed_classes(home_kb):
    """elicit_preferences() - items must share a class"""
    with raises(FlowError):
        elicit_preferences(home_kb, _dialogue("malz"), ["malz", "noodles"])


@mark.parametrize(
    "answers, expected",
    [(["yes"], "yes"), (["maybe", "no"], "no"), (["maybe", "perhaps"], "yes")],
)
def test_ask_choice(answers, expected):
    """ask_choice() - one re-ask, then the default"""
    dialogue = _dialogue(*answers)
    assert ask_choice(dialogue, "Really?", ("yes", "no"), "yes") == expected
    assert dialogue.robot_lines().count("Really?") == len(answers)


def test_ask_choice_without_reply():
    """ask_choice() - silence is an error"""
    with raises(FlowError):
        ask_choice(Dialogue(), "Really?", ("yes", "no"), "yes")


def test_build_final_list(home_kb):
    """build_final_list() - classes resolve to the favorite; others keep or switch"""
    elicit_preferences(home_kb, _dialogue("malz"), ["malz", "coke"])
    elicit_preferences(home_kb, _dialogue("noodles"), ["noodles", "bisquits"])
    final = build_final_list(["drink", "bisquits"], home_kb, _dialogue("yes", "no"))
    assert final == [OrderItem("drink", "malz", "preferred"), OrderItem("bisquits", "noodles", "confirmed-switch")]
    final = build_final_list(["coke", "noodles"], home_kb, _dialogue("yes"))
    assert final == [OrderItem("coke", "coke", "direct"), OrderItem("noodles", "noodles", "direct")]


@mark.parametrize("request_name", ["pizza", "drink"])
def test_build_final_list_unresolvable(home_kb, request_name):
    """build_final_list() - unknown names and classes without a favorite"""
    with raises(UnresolvableRequest):
        build_final_list([request_name], home_kb, _dialogue("yes"))


def test_fetch_items_walks_location_order(data_dir, home_kb):
    """fetch_items() - shelves are visited in preference order until the object is seen"""
    world = load_scenario_file(data_dir / "scenarios" / "home.scn").world
    dialogue = Dialogue()
    world, record = fetch_items([OrderItem("noodles", "noodles")], world, home_kb, dialogue)
    assert record.entries[0].visited == ("shelf_food", "shelf_snacks")
    assert record.delivered == [("noodles", "shelf_snacks")]
    assert ("noodles", "user") in world.delivered
    assert record.observed["bisquits"] == "shelf_food"
    assert home_kb.value_of("coke", "last_seen") == sym("shelf_snacks")


def test_fetch_items_nothing_to_fetch(data_dir, home_kb):
    """fetch_items() - an empty order"""
    world = load_scenario_file(data_dir / "scenarios" / "home.scn").world
    with raises(FlowError):
        fetch_items([], world, home_kb, Dialogue())


def test_fetch_items_gives_up_when_nowhere(data_dir, home_kb):
    """fetch_items() - an object on none of its preferred shelves ends the flow"""
    world = load_scenario_file(data_dir / "scenarios" / "home.scn").world
    world = replace(world, placement={o: s for o, s in world.placement.items() if o != "noodles"})
    dialogue = Dialogue()
    with raises(GiveUp, match="noodles was not found on any shelf"):
        fetch_items([OrderItem("noodles", "noodles")], world, home_kb, dialogue)
    assert "The noodles is not in the shelf of food." in dialogue.robot_lines()
