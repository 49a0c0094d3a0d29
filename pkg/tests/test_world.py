"""
unit tests for servicebot.services.world
"""
from dataclasses import replace

from pytest import raises

from servicebot.errors import WorldError
from servicebot.services.world import (
    Dialogue,
    ScriptedReplies,
    behavior_deliver,
    behavior_find,
    behavior_move,
    behavior_see,
    behavior_take,
    check_conservation,
    load_scenario,
    load_scenario_file,
)
from servicebot.utils.terms import Symbol, comp, lst, sym

HOME = """
location(welcome_point). location(living_room).
shelf(shelf_food, food). shelf(shelf_drinks, drink). shelf(shelf_snacks, comestible).
place(malz, shelf_drinks). place(coke, shelf_snacks). place(noodles, shelf_snacks). place(bisquits, shelf_food).
robot_at(welcome_point). person(user, living_room). hand(malz, left).
"""


def _world(extra=""):
    return load_scenario(HOME + extra, source="home.scn").world


def test_load_scenario_facts(data_dir):
    """load_scenario_file() - the shipped home scenario"""
    scenario = load_scenario_file(data_dir / "scenarios" / "home.scn")
    assert scenario.name == "home"
    assert scenario.flow == "home"
    assert scenario.programs == ["home", "recovery"]
    assert scenario.preference_items == [["malz", "coke"], ["noodles", "bisquits"]]
    assert scenario.replies[0] == (sym("malz"), "I prefer malz")
    assert scenario.world.placement["coke"] == "shelf_snacks"
    assert scenario.world.location_of("user") == "living_room"


def test_load_scenario_reply_text_defaults_to_term():
    """load_scenario() - reply/1 uses the printed term as the text"""
    scenario = load_scenario("reply(bring([drink, bisquits])).")
    assert scenario.replies == [(comp("bring", lst(sym("drink"), sym("bisquits"))), "bring([drink,bisquits])")]


def test_load_scenario_errors():
    """load_scenario() - unknown facts and shelves carry the file"""
    with raises(WorldError, match="unknown scenario fact"):
        load_scenario("teleport(robot).", source="bad.scn")
    with raises(WorldError, match="unknown shelf"):
        load_scenario("place(malz, nowhere).", source="bad.scn")
    with raises(WorldError, match="bad.scn"):
        load_scenario("preferred_hand(middle).", source="bad.scn")


def test_move_and_injected_error():
    """behavior_move() - the n-th invocation fails with the injected kind"""
    w = _world("inject(move, 2, door_closed).")
    w, result = behavior_move(w, "shelf_food")
    assert result.is_ok and w.robot_at == "shelf_food"
    w, result = behavior_move(w, "living_room")
    assert result.kind == "door_closed"
    assert w.robot_at == "shelf_food"
    w, result = behavior_move(w, "user")
    assert result.is_ok and w.robot_at == "living_room"
    with raises(WorldError):
        behavior_move(w, "garage")


def test_see_updates_beliefs(home_kb):
    """behavior_see() - observed objects, exceptions and misplaced objects"""
    w = replace(_world(), robot_at="shelf_drinks")
    w, observation, notes = behavior_see(w, home_kb, "shelf_drinks")
    assert observation.observed == ("malz",)
    assert observation.unseen == ("coke",)
    assert "exception: coke not at shelf_drinks" in notes
    assert home_kb.value_of("malz", "last_seen") == Symbol("shelf_drinks")
    assert home_kb.location_order("coke")[0] == "shelf_snacks"


def test_see_marks_misplaced(home_kb):
    """behavior_see() - an object not of the shelf's class"""
    w = replace(_world(), placement={"coke": "shelf_food"}, robot_at="shelf_food")
    w, observation, notes = behavior_see(w, home_kb, "shelf_food")
    assert observation.misplaced == ("coke",)
    assert home_kb.holds("coke", "misplaced")
    assert "misplaced: coke at shelf_food" in notes


def test_see_requires_robot_at_shelf(home_kb):
    """behavior_see() - precondition violation"""
    with raises(WorldError):
        behavior_see(_world(), home_kb, "shelf_food")


def test_take_uses_hand_override_and_fills_hands(home_kb):
    """behavior_take() - hand choice and free-hand precondition"""
    w = replace(_world(), robot_at="shelf_snacks")
    w, result = behavior_take(w, home_kb, "coke")
    assert result.payload == "right"
    w, result = behavior_take(w, home_kb, "malz")
    assert result.kind == "not_found"
    w, result = behavior_take(w, home_kb, "noodles")
    assert result.payload == "left"
    w, result = behavior_take(w, home_kb, "malz")
    assert result.kind == "hands_full"


def test_take_then_deliver_conserves_objects(home_kb):
    """behavior_deliver() - every object stays in exactly one place"""
    before = replace(_world(), robot_at="shelf_drinks")
    w, result = behavior_take(before, home_kb, "malz")
    assert result.payload == "left"
    w, result = behavior_deliver(w, "malz", "user")
    assert result.kind == "wrong_location"
    w, _ = behavior_find(w, "user")
    w, result = behavior_deliver(w, "malz", "user")
    assert result.is_ok
    assert w.where_is("malz") == "delivered:user"
    assert check_conservation(before, w)
    w, result = behavior_deliver(w, "malz", "user")
    assert result.kind == "not_held"


def test_deliver_to_shelf_clears_misplaced(home_kb):
    """behavior_deliver() - putting an object on its class shelf"""
    home_kb.assert_clause("coke", "misplaced")
    w = replace(_world(), robot_at="shelf_snacks")
    w, _ = behavior_take(w, home_kb, "coke")
    w, _ = behavior_move(w, "shelf_drinks")
    w, result = behavior_deliver(w, "coke", "shelf_drinks", kb=home_kb)
    assert result.is_ok
    assert w.placement["coke"] == "shelf_drinks"
    assert not home_kb.holds("coke", "misplaced")


def test_dialogue_transcript():
    """Dialogue - replies are read in order; no reply is an error"""
    seen = []
    dialogue = Dialogue(ScriptedReplies([(sym("yes"), "Yes")]), listener=seen.append)
    assert dialogue.ask("Ready?").payload == sym("yes")
    assert dialogue.ask("Again?").kind == "no_reply"
    assert [u.act for u in seen] == ["ask", "reply", "ask"]
    assert not dialogue.is_balanced()
