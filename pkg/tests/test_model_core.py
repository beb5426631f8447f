"""Structural helpers and well-formedness validation.

The TrafficLight assertions pin the exact helper outputs for the shipped
running example; they double as the reference fixture for every other layer.
"""

import pytest

from pmx import model as M
from pmx.actions import ActionBlock, Binary, Lit, Log, Var


def ctr(traffic_model):
    return traffic_model.component("CTR").behavior


class TestHelpersOnTrafficLight:
    def test_inp_uc(self, traffic_model):
        assert M.msg_names(M.inp(traffic_model, "UC")) == {"on", "off"}

    def test_inp_ctr_derived_by_port_enumeration(self, traffic_model):
        # base ControlP port contributes on/off; conjugated StopLightP port
        # contributes nothing inbound; conjugated timing port flips timeout in
        assert M.msg_names(M.inp(traffic_model, "CTR")) == {"on", "off", "timeout"}
        assert M.msg_names(M.outp(traffic_model, "CTR")) == {
            "red", "green", "yellow", "on", "off", "startTimer"}

    def test_inp_no_ports(self):
        model = M.SystemModel("X", components=[M.Component("a")])
        assert M.inp(model, "a") == []

    def test_in_out_en1(self, traffic_model):
        h = ctr(traffic_model)
        assert M.structural_query(h, "in_t", "en1") == ["t12"]
        assert M.structural_query(h, "out_t", "en1") == ["t21"]

    def test_child_of_root_is_transitive(self, traffic_model):
        h = ctr(traffic_model)
        assert set(M.structural_query(h, "child", M.ROOT_ID)) == {
            "s11", "s21", "s22", "s23", "en1", "in11", "c11"}

    def test_parent_and_parents(self, traffic_model):
        h = ctr(traffic_model)
        assert M.structural_query(h, "parent", "s21") == "c11"
        assert M.structural_query(h, "parents", "s21") == ["c11", M.ROOT_ID]

    def test_handled_s11(self, traffic_model):
        assert M.msg_names(M.handled(ctr(traffic_model), "s11")) == {"on"}

    def test_deadlock(self, traffic_model):
        h = ctr(traffic_model)
        assert M.deadlock(h, "s23") is True
        assert M.deadlock(h, "s11") is False

    def test_next_t(self, traffic_model):
        h = ctr(traffic_model)
        assert M.next_t(h, "s21", "on") is None
        assert M.next_t(h, "s21", "timeout").id == "t22"

    def test_up_s(self, traffic_model):
        h = ctr(traffic_model)
        assert M.up_s(h, "s21", h.transition("t13")) == ["s21", "c11"]
        assert M.up_s(h, "s21", h.transition("t22")) == ["s21"]


class TestHelpersOnNested:
    def test_handled_unions_ancestors(self, nested_model):
        h = nested_model.component("N").behavior
        assert M.msg_names(M.handled(h, "outer.inner.n1")) == {"a", "b"}

    def test_next_t_prefers_deeper_level(self, nested_model):
        h = nested_model.component("N").behavior
        # both inner (tgrp2) and outer (tgrpb) handle b; the deeper one wins
        assert M.next_t(h, "outer.inner.n1", "b").id == "tgrp2"

    def test_up_s_three_levels(self, nested_model):
        h = nested_model.component("N").behavior
        t = h.transition("tgrp")
        assert M.up_s(h, "outer.inner.n1", t) == ["outer.inner.n1", "outer.inner", "outer"]

    def test_up_s_unrelated_transition(self, nested_model):
        h = nested_model.component("N").behavior
        with pytest.raises(M.ModelError):
            M.up_s(h, "s0", h.transition("tgrp2"))


class TestNextSAndHistory:
    def test_history_lookup(self, traffic_model):
        h = ctr(traffic_model)
        assert M.next_s(h, "c11", {"c11": "s21"}) == "s21"

    def test_default_is_initial_pseudo(self, nested_model):
        h = nested_model.component("N").behavior
        assert M.next_s(h, "outer", {}) == "outer.io"

    def test_childless_composite(self):
        h = M.Hsm()
        h.add_state(M.State("c", "c", M.COMPOSITE))
        assert M.next_s(h, "c", {}) is None

    def test_u_h_records_basic_states_only(self, traffic_model):
        h = ctr(traffic_model)
        assert M.u_h(h, "s21", {}) == {"c11": "s21"}
        assert M.u_h(h, "en1", {"x": "y"}) == {"x": "y"}

    def test_u_h_top_level_basic_uses_root(self, traffic_model):
        h = ctr(traffic_model)
        hist = M.u_h(h, "s11", {})
        assert hist == {M.ROOT_ID: "s11"}

    def test_u_h_next_s_round_trip(self, traffic_model):
        h = ctr(traffic_model)
        for sid in ("s21", "s22", "s23"):
            assert M.next_s(h, "c11", M.u_h(h, sid, {})) == sid

    def test_u_h_is_pure(self, traffic_model):
        h = ctr(traffic_model)
        before = {}
        M.u_h(h, "s21", before)
        assert before == {}


class TestStructuralInvariants:
    def test_child_parent_agreement(self, traffic_model, nested_model, chooser_model):
        for model in (traffic_model, nested_model, chooser_model):
            for comp in model.components:
                if comp.behavior is None:
                    continue
                h = comp.behavior
                for s in h.descendants(M.ROOT_ID):
                    parent = h.parent(s.id)
                    assert s.id in [c.id for c in h.children(parent.id)]

    def test_next_t_implies_handled(self, traffic_model, nested_model):
        for model in (traffic_model, nested_model):
            for comp in model.components:
                if comp.behavior is None:
                    continue
                h = comp.behavior
                names = {r.message for r in M.inp(model, comp)}
                for s in h.descendants(M.ROOT_ID):
                    if s.kind != M.BASIC:
                        continue
                    for m in names:
                        t = M.next_t(h, s.id, m)
                        if t is not None:
                            assert m in M.msg_names(M.handled(h, s.id))
                    assert M.deadlock(h, s.id) == (not M.handled(h, s.id))

    def test_handled_rejects_pseudo(self, traffic_model):
        with pytest.raises(M.ModelError):
            M.handled(ctr(traffic_model), "en1")

    def test_deadlock_rejects_non_basic(self, traffic_model):
        with pytest.raises(M.ModelError):
            M.deadlock(ctr(traffic_model), "c11")

    def test_unknown_element(self, traffic_model):
        with pytest.raises(M.ModelError):
            M.structural_query(ctr(traffic_model), "in_t", "nope")


class TestValidate:
    def test_traffic_light_is_well_formed(self, traffic_model):
        assert M.validate(traffic_model) == []

    def test_validate_is_idempotent(self, traffic_model):
        assert M.validate(traffic_model) == M.validate(traffic_model)

    def _one_component(self):
        model = M.SystemModel("T")
        model.interfaces.append(M.Interface("I", [(M.MessageDecl("m"), M.INPUT),
                                                  (M.MessageDecl("n"), M.INPUT)]))
        comp = M.Component("c", ports=[M.Port("p", "I")])
        comp.behavior = M.Hsm()
        model.components.append(comp)
        return model, comp, comp.behavior

    def test_guard_on_non_choice(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t", "a", "b", (M.MsgRef("p", "m"),),
                                      guard=Binary("==", Lit(1), Lit(1))))
        codes = [v.code for v in M.validate(model)]
        assert "GuardOnNonChoice" in codes

    def test_non_disjoint_triggers(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t1", "a", "b", (M.MsgRef("p", "m"),)))
        h.add_transition(M.Transition("t2", "a", "a", (M.MsgRef("p", "m"),)))
        codes = [v.code for v in M.validate(model)]
        assert "NonDisjointTriggers" in codes

    def test_trigger_on_pseudo(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("i", "i", M.INITIAL))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t", "i", "b", (M.MsgRef("p", "m"),)))
        assert "TriggerOnPseudo" in [v.code for v in M.validate(model)]

    def test_cross_boundary(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("c", "c", M.COMPOSITE))
        h.add_state(M.State("x", "x", M.BASIC, parent="c"))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t", "b", "x", (M.MsgRef("p", "m"),)))
        assert "CrossBoundary" in [v.code for v in M.validate(model)]

    def test_entry_exit_hops_are_legal(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("c", "c", M.COMPOSITE))
        h.add_state(M.State("en", "en", M.ENTRY_POINT, parent="c"))
        h.add_state(M.State("ex", "ex", M.EXIT_POINT, parent="c"))
        h.add_state(M.State("x", "x", M.BASIC, parent="c"))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_state(M.State("i", "i", M.INITIAL))
        h.add_transition(M.Transition("t0", "i", "b"))
        h.add_transition(M.Transition("t1", "b", "en", (M.MsgRef("p", "m"),)))
        h.add_transition(M.Transition("t2", "en", "x"))
        h.add_transition(M.Transition("t3", "x", "ex", (M.MsgRef("p", "n"),)))
        h.add_transition(M.Transition("t4", "ex", "b"))
        assert M.validate(model) == []

    def test_multi_out_pseudo(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("i", "i", M.INITIAL))
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t1", "i", "a"))
        h.add_transition(M.Transition("t2", "i", "b"))
        assert "MultiOutPseudo" in [v.code for v in M.validate(model)]

    def test_multiple_initial(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("i1", "i1", M.INITIAL))
        h.add_state(M.State("i2", "i2", M.INITIAL))
        assert "MultipleInitial" in [v.code for v in M.validate(model)]

    def test_unknown_trigger(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_transition(M.Transition("t", "a", "a", (M.MsgRef("p", "zz"),)))
        assert "UnknownTrigger" in [v.code for v in M.validate(model)]

    def test_connector_rules(self, traffic):
        traffic.connectors.append((("UC", "userP"), ("SLD", "sldP")))
        codes = [v.code for v in M.validate(traffic)]
        assert "ConnectorTypeMismatch" in codes

    def test_connector_conjugation(self):
        model, comp, h = self._one_component()
        model.components.append(M.Component("d", ports=[M.Port("p", "I")]))
        model.connectors.append((("c", "p"), ("d", "p")))
        assert "ConnectorConjugation" in [v.code for v in M.validate(model)]

    def test_action_type_checking(self):
        model, comp, h = self._one_component()
        h.add_state(M.State("a", "a", M.BASIC,
                            entry=ActionBlock((Log(Binary("+", Lit(1), Lit(True))),))))
        assert "ActionType" in [v.code for v in M.validate(model)]
