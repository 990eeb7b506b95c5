//! Block-stacking world: symbolic state, the eleven action rules, plan
//! validation, no-op canonicalization, and a breadth-first shortest-plan
//! oracle.
//!
//! A state places every block in exactly one of three situations: on the
//! table, on top of another block, or held. "Clear" is derived: a block is
//! clear when nothing sits on it and it is not held.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use thiserror::Error;

/// Canonical block identifier (lowercase word, e.g. "red" or "b").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Block(String);

impl Block {
    pub fn new(name: impl AsRef<str>) -> Block {
        Block(name.as_ref().trim().to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Block {
    fn from(s: &str) -> Block {
        Block::new(s)
    }
}

/// The four action kinds.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockAction {
    PickUp(Block),
    PutDown(Block),
    Unstack(Block, Block),
    Stack(Block, Block),
}

impl BlockAction {
    /// Canonical lowercase tuple rendering, e.g. `(unstack b c)`.
    pub fn to_tuple(&self) -> String {
        match self {
            BlockAction::PickUp(x) => format!("(pick-up {x})"),
            BlockAction::PutDown(x) => format!("(put-down {x})"),
            BlockAction::Unstack(x, y) => format!("(unstack {x} {y})"),
            BlockAction::Stack(x, y) => format!("(stack {x} {y})"),
        }
    }
}

impl fmt::Display for BlockAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tuple())
    }
}

/// Canonical single-line rendering of a plan: tuples joined by single spaces.
pub fn plan_to_string(plan: &[BlockAction]) -> String {
    plan.iter()
        .map(BlockAction::to_tuple)
        .collect::<Vec<_>>()
        .join(" ")
}

/// The eleven restrictions stated in the task prompt, by number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    R11,
}

impl Rule {
    pub fn number(self) -> u8 {
        match self {
            Rule::R1 => 1,
            Rule::R2 => 2,
            Rule::R3 => 3,
            Rule::R4 => 4,
            Rule::R5 => 5,
            Rule::R6 => 6,
            Rule::R7 => 7,
            Rule::R8 => 8,
            Rule::R9 => 9,
            Rule::R10 => 10,
            Rule::R11 => 11,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Rule::R1 => "You can only pick up or unstack one block at a time.",
            Rule::R2 => "You can only pick up or unstack a block if your hand is empty.",
            Rule::R3 => "You can only pick up a block if the block is on the table and the block is clear. A block is clear if the block has no other blocks on top of it and if the block is not picked up.",
            Rule::R4 => "You can only unstack a block from on top of another block if the block you are unstacking was really on top of the other block.",
            Rule::R5 => "You can only unstack a block from on top of another block if the block you are unstacking is clear.",
            Rule::R6 => "Once you pick up or unstack a block, you are holding the block.",
            Rule::R7 => "You can only put down a block that you are holding.",
            Rule::R8 => "You can only stack a block on top and not under of another block if you are holding the block being stacked.",
            Rule::R9 => "You can only stack a block on top and not under of another block if the block onto which you are stacking the block is clear.",
            Rule::R10 => "Once you put down or stack a block, your hand becomes empty.",
            Rule::R11 => "Once you stack a block on top of a second block, the second block is no longer clear.",
        }
    }
}

/// An action rejected by the simulator, tagged with the violated rule.
/// Rules 6, 10, and 11 describe effects and are enforced by construction;
/// rule 1 is subsumed by rule 2 (a full hand is how a second pick would
/// happen), so violations surface rules 2-5 and 7-9.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("rule {} violated by {action}: {message}", rule.number())]
pub struct RuleViolation {
    pub rule: Rule,
    pub action: BlockAction,
    pub message: String,
}

/// Symbolic world state.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlocksState {
    /// `on[x] = y` means x sits directly on y.
    pub on: BTreeMap<Block, Block>,
    pub on_table: BTreeSet<Block>,
    pub holding: Option<Block>,
}

impl BlocksState {
    /// Whether `b` is placed anywhere in this state.
    pub fn contains(&self, b: &Block) -> bool {
        self.on_table.contains(b)
            || self.on.contains_key(b)
            || self.on.values().any(|y| y == b)
            || self.holding.as_ref() == Some(b)
    }

    pub fn blocks(&self) -> BTreeSet<Block> {
        let mut out: BTreeSet<Block> = self.on_table.iter().cloned().collect();
        for (x, y) in &self.on {
            out.insert(x.clone());
            out.insert(y.clone());
        }
        if let Some(h) = &self.holding {
            out.insert(h.clone());
        }
        out
    }

    /// Clear = known, nothing on top, not held.
    pub fn is_clear(&self, b: &Block) -> bool {
        self.contains(b) && self.holding.as_ref() != Some(b) && !self.on.values().any(|y| y == b)
    }

    pub fn clear_blocks(&self) -> BTreeSet<Block> {
        self.blocks()
            .into_iter()
            .filter(|b| self.is_clear(b))
            .collect()
    }

    pub fn hand_empty(&self) -> bool {
        self.holding.is_none()
    }

    /// Verify structural invariants: every block in exactly one situation
    /// and no cycles in the `on` relation.
    pub fn check(&self) -> Result<(), StateError> {
        for b in self.blocks() {
            let places = [
                self.on_table.contains(&b),
                self.on.contains_key(&b),
                self.holding.as_ref() == Some(&b),
            ]
            .iter()
            .filter(|p| **p)
            .count();
            if places != 1 {
                return Err(StateError::Placement(b.clone()));
            }
        }
        // Walk up from every block; revisiting one means a cycle.
        for start in self.on.keys() {
            let mut seen = BTreeSet::new();
            let mut cur = start;
            while let Some(next) = self.on.get(cur) {
                if !seen.insert(cur.clone()) {
                    return Err(StateError::Cycle(start.clone()));
                }
                cur = next;
            }
        }
        Ok(())
    }

    /// Apply one action, returning the successor state or the violated rule.
    pub fn apply(&self, action: &BlockAction) -> Result<BlocksState, RuleViolation> {
        let fail = |rule: Rule, message: String| {
            Err(RuleViolation {
                rule,
                action: action.clone(),
                message,
            })
        };
        match action {
            BlockAction::PickUp(x) => {
                if let Some(h) = &self.holding {
                    return fail(Rule::R2, format!("hand is not empty (holding {h})"));
                }
                if !self.on_table.contains(x) {
                    return fail(Rule::R3, format!("{x} is not on the table"));
                }
                if !self.is_clear(x) {
                    return fail(Rule::R3, format!("{x} is not clear"));
                }
                let mut next = self.clone();
                next.on_table.remove(x);
                next.holding = Some(x.clone());
                Ok(next)
            }
            BlockAction::Unstack(x, y) => {
                if let Some(h) = &self.holding {
                    return fail(Rule::R2, format!("hand is not empty (holding {h})"));
                }
                if self.on.get(x) != Some(y) {
                    return fail(Rule::R4, format!("{x} is not on top of {y}"));
                }
                if !self.is_clear(x) {
                    return fail(Rule::R5, format!("{x} is not clear"));
                }
                let mut next = self.clone();
                next.on.remove(x);
                next.holding = Some(x.clone());
                Ok(next)
            }
            BlockAction::PutDown(x) => {
                if self.holding.as_ref() != Some(x) {
                    return fail(Rule::R7, format!("not holding {x}"));
                }
                let mut next = self.clone();
                next.holding = None;
                next.on_table.insert(x.clone());
                Ok(next)
            }
            BlockAction::Stack(x, y) => {
                if self.holding.as_ref() != Some(x) {
                    return fail(Rule::R8, format!("not holding {x}"));
                }
                if !self.is_clear(y) {
                    return fail(Rule::R9, format!("{y} is not clear"));
                }
                let mut next = self.clone();
                next.holding = None;
                next.on.insert(x.clone(), y.clone());
                Ok(next)
            }
        }
    }

    /// Enumerate every action legal in this state, in deterministic order.
    pub fn legal_actions(&self) -> Vec<BlockAction> {
        let mut out = Vec::new();
        match &self.holding {
            Some(x) => {
                out.push(BlockAction::PutDown(x.clone()));
                for y in self.clear_blocks() {
                    if &y != x {
                        out.push(BlockAction::Stack(x.clone(), y.clone()));
                    }
                }
            }
            None => {
                for x in self.clear_blocks() {
                    if self.on_table.contains(&x) {
                        out.push(BlockAction::PickUp(x.clone()));
                    } else if let Some(y) = self.on.get(&x) {
                        out.push(BlockAction::Unstack(x.clone(), y.clone()));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StateError {
    #[error("block {0} is not in exactly one of on-table/on/held")]
    Placement(Block),
    #[error("cycle in the on-top-of relation involving {0}")]
    Cycle(Block),
    #[error("clear({0}) declared but not consistent with the stacking")]
    ClearMismatch(Block),
    #[error("hand declared empty but a block is held")]
    HandMismatch,
}

/// Positive goal conjunction: every `on(x, y)` must hold in the final state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Goal {
    pub on: Vec<(Block, Block)>,
}

impl Goal {
    pub fn new(on: Vec<(Block, Block)>) -> Goal {
        Goal { on }
    }

    pub fn satisfied(&self, state: &BlocksState) -> bool {
        self.on.iter().all(|(x, y)| state.on.get(x) == Some(y))
    }
}

/// Step at which a plan failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFailure {
    pub index: usize,
    pub rule: Rule,
    pub message: String,
}

/// Outcome of validating a plan against an initial state and goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub valid: bool,
    pub failed_step: Option<PlanFailure>,
    pub final_state: BlocksState,
    pub goal_satisfied: bool,
}

/// Fold the plan through the simulator, stopping at the first violation.
/// `goal_satisfied` is only meaningful when the plan is valid.
pub fn validate_plan(initial: &BlocksState, goal: &Goal, plan: &[BlockAction]) -> PlanReport {
    let mut state = initial.clone();
    for (index, action) in plan.iter().enumerate() {
        match state.apply(action) {
            Ok(next) => state = next,
            Err(v) => {
                return PlanReport {
                    valid: false,
                    failed_step: Some(PlanFailure {
                        index,
                        rule: v.rule,
                        message: v.to_string(),
                    }),
                    final_state: state,
                    goal_satisfied: false,
                }
            }
        }
    }
    let goal_satisfied = goal.satisfied(&state);
    PlanReport {
        valid: true,
        failed_step: None,
        final_state: state,
        goal_satisfied,
    }
}

/// Remove redundant no-op steps: adjacent `(stack x y, unstack x y)` and
/// `(put-down x, pick-up x)` pairs are deleted until a fixpoint is reached.
/// Everything else keeps its order.
pub fn canonicalize_plan(plan: &[BlockAction]) -> Vec<BlockAction> {
    let mut out: Vec<BlockAction> = Vec::with_capacity(plan.len());
    for action in plan {
        let cancels = match (out.last(), action) {
            (Some(BlockAction::Stack(a, b)), BlockAction::Unstack(x, y)) => a == x && b == y,
            (Some(BlockAction::PutDown(a)), BlockAction::PickUp(x)) => a == x,
            _ => false,
        };
        if cancels {
            out.pop();
        } else {
            out.push(action.clone());
        }
    }
    out
}

/// Plans are equivalent when their canonicalized tuple strings match.
pub fn plans_equivalent(p1: &[BlockAction], p2: &[BlockAction]) -> bool {
    plan_to_string(&canonicalize_plan(p1)) == plan_to_string(&canonicalize_plan(p2))
}

/// Breadth-first search for a shortest plan from `initial` to `goal`.
/// Returns `None` when the goal is unreachable within the step budget.
pub fn oracle_bfs_plan(initial: &BlocksState, goal: &Goal) -> Option<Vec<BlockAction>> {
    oracle_bfs_plan_budgeted(initial, goal, 2_000_000)
}

pub fn oracle_bfs_plan_budgeted(
    initial: &BlocksState,
    goal: &Goal,
    max_expansions: u64,
) -> Option<Vec<BlockAction>> {
    if goal.satisfied(initial) {
        return Some(Vec::new());
    }
    let mut parents: HashMap<BlocksState, (BlocksState, BlockAction)> = HashMap::new();
    let mut queue: VecDeque<BlocksState> = VecDeque::new();
    queue.push_back(initial.clone());
    let mut seen: BTreeSet<BlocksState> = BTreeSet::new();
    seen.insert(initial.clone());
    let mut expansions = 0u64;

    while let Some(state) = queue.pop_front() {
        expansions += 1;
        if expansions > max_expansions {
            return None;
        }
        for action in state.legal_actions() {
            let next = state.apply(&action).expect("legal action applies");
            if seen.contains(&next) {
                continue;
            }
            parents.insert(next.clone(), (state.clone(), action.clone()));
            if goal.satisfied(&next) {
                let mut plan = Vec::new();
                let mut cur = next;
                while let Some((prev, act)) = parents.get(&cur) {
                    plan.push(act.clone());
                    cur = prev.clone();
                }
                plan.reverse();
                return Some(plan);
            }
            seen.insert(next.clone());
            queue.push_back(next);
        }
    }
    None
}

/// Initial-state / goal predicate written in instance files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    On(Block, Block),
    OnTable(Block),
    Clear(Block),
    HandEmpty,
}

/// One planning problem: blocks, initial conditions, goal conjunction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlocksInstance {
    pub blocks: Vec<Block>,
    pub init: Vec<Predicate>,
    pub goal: Vec<Predicate>,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("initial state is inconsistent: {0}")]
    BadState(#[from] StateError),
    #[error("block {0} has no initial placement")]
    Unplaced(Block),
    #[error("goal predicate {0:?} is not a positive on(x, y) condition")]
    BadGoal(Predicate),
}

impl BlocksInstance {
    /// Build the symbolic initial state, validating consistency against the
    /// declared predicates.
    pub fn initial_state(&self) -> Result<BlocksState, InstanceError> {
        let mut state = BlocksState::default();
        let mut declared_clear = BTreeSet::new();
        let mut declared_hand_empty = false;
        for p in &self.init {
            match p {
                Predicate::On(x, y) => {
                    state.on.insert(x.clone(), y.clone());
                }
                Predicate::OnTable(x) => {
                    state.on_table.insert(x.clone());
                }
                Predicate::Clear(x) => {
                    declared_clear.insert(x.clone());
                }
                Predicate::HandEmpty => declared_hand_empty = true,
            }
        }
        for b in &self.blocks {
            if !state.contains(b) {
                return Err(InstanceError::Unplaced(b.clone()));
            }
        }
        state.check()?;
        for c in &declared_clear {
            if !state.is_clear(c) {
                return Err(InstanceError::BadState(StateError::ClearMismatch(
                    c.clone(),
                )));
            }
        }
        if declared_hand_empty && state.holding.is_some() {
            return Err(InstanceError::BadState(StateError::HandMismatch));
        }
        Ok(state)
    }

    pub fn goal(&self) -> Result<Goal, InstanceError> {
        let mut on = Vec::new();
        for p in &self.goal {
            match p {
                Predicate::On(x, y) => on.push((x.clone(), y.clone())),
                other => return Err(InstanceError::BadGoal(other.clone())),
            }
        }
        Ok(Goal::new(on))
    }

    /// Initial-conditions sentence in the task's phrasing: clear facts, the
    /// hand, on-top-of facts, then table facts.
    pub fn render_initial_conditions(&self) -> String {
        let state = match self.initial_state() {
            Ok(s) => s,
            Err(_) => return String::new(),
        };
        let mut clauses: Vec<String> = Vec::new();
        for b in state.clear_blocks() {
            clauses.push(format!("the {b} block is clear"));
        }
        if state.hand_empty() {
            clauses.push("the hand is empty".into());
        }
        for p in &self.init {
            if let Predicate::On(x, y) = p {
                clauses.push(format!("the {x} block is on top of the {y} block"));
            }
        }
        for p in &self.init {
            if let Predicate::OnTable(x) = p {
                clauses.push(format!("the {x} block is on the table"));
            }
        }
        join_clauses(&clauses)
    }

    /// Goal sentence in the task's phrasing.
    pub fn render_goal(&self) -> String {
        let clauses: Vec<String> = self
            .goal
            .iter()
            .filter_map(|p| match p {
                Predicate::On(x, y) => Some(format!("the {x} block on top of the {y} block")),
                _ => None,
            })
            .collect();
        join_clauses(&clauses)
    }
}

fn join_clauses(clauses: &[String]) -> String {
    match clauses.len() {
        0 => String::new(),
        1 => clauses[0].clone(),
        n => format!("{} and {}", clauses[..n - 1].join(", "), clauses[n - 1]),
    }
}

/// The three-block instance used throughout the task prompts: blue on red,
/// orange on blue, red on the table; goal red-on-blue and orange-on-red.
pub fn reference_instance() -> BlocksInstance {
    let (red, blue, orange) = (Block::new("red"), Block::new("blue"), Block::new("orange"));
    BlocksInstance {
        blocks: vec![red.clone(), blue.clone(), orange.clone()],
        init: vec![
            Predicate::Clear(orange.clone()),
            Predicate::HandEmpty,
            Predicate::On(blue.clone(), red.clone()),
            Predicate::On(orange.clone(), blue.clone()),
            Predicate::OnTable(red.clone()),
        ],
        goal: vec![
            Predicate::On(red.clone(), blue.clone()),
            Predicate::On(orange, red),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(name: &str) -> Block {
        Block::new(name)
    }

    fn reference_state() -> BlocksState {
        reference_instance().initial_state().unwrap()
    }

    #[test]
    fn reference_initial_state_is_consistent() {
        let state = reference_state();
        assert!(state.is_clear(&b("orange")));
        assert!(!state.is_clear(&b("red")));
        assert!(!state.is_clear(&b("blue")));
        assert!(state.hand_empty());
        state.check().unwrap();
    }

    #[test]
    fn unstack_from_reference_state() {
        let state = reference_state();
        let next = state
            .apply(&BlockAction::Unstack(b("orange"), b("blue")))
            .unwrap();
        assert_eq!(next.holding, Some(b("orange")));
        assert!(next.is_clear(&b("blue")));
    }

    #[test]
    fn pick_up_covered_block_violates_rule_3() {
        let state = reference_state();
        let err = state.apply(&BlockAction::PickUp(b("red"))).unwrap_err();
        assert_eq!(err.rule, Rule::R3);
    }

    #[test]
    fn stack_without_holding_violates_rule_8() {
        let state = reference_state();
        let err = state
            .apply(&BlockAction::Stack(b("orange"), b("red")))
            .unwrap_err();
        assert_eq!(err.rule, Rule::R8);
    }

    #[test]
    fn unstack_wrong_base_violates_rule_4() {
        let state = reference_state();
        let err = state
            .apply(&BlockAction::Unstack(b("orange"), b("red")))
            .unwrap_err();
        assert_eq!(err.rule, Rule::R4);
    }

    #[test]
    fn pick_up_with_full_hand_violates_rule_2() {
        let state = reference_state();
        let held = state
            .apply(&BlockAction::Unstack(b("orange"), b("blue")))
            .unwrap();
        let err = held.apply(&BlockAction::PickUp(b("red"))).unwrap_err();
        assert_eq!(err.rule, Rule::R2);
    }

    #[test]
    fn unknown_blocks_fail_the_matching_precondition() {
        let state = reference_state();
        assert_eq!(
            state
                .apply(&BlockAction::PickUp(b("teal")))
                .unwrap_err()
                .rule,
            Rule::R3
        );
        let held = state
            .apply(&BlockAction::Unstack(b("orange"), b("blue")))
            .unwrap();
        assert_eq!(
            held.apply(&BlockAction::Stack(b("orange"), b("teal")))
                .unwrap_err()
                .rule,
            Rule::R9
        );
    }

    // Independent shortest-plan check for the reference instance: the
    // expected eight-step plan, frozen after confirming it with the
    // breadth-first oracle below.
    fn reference_plan() -> Vec<BlockAction> {
        vec![
            BlockAction::Unstack(b("orange"), b("blue")),
            BlockAction::PutDown(b("orange")),
            BlockAction::Unstack(b("blue"), b("red")),
            BlockAction::PutDown(b("blue")),
            BlockAction::PickUp(b("red")),
            BlockAction::Stack(b("red"), b("blue")),
            BlockAction::PickUp(b("orange")),
            BlockAction::Stack(b("orange"), b("red")),
        ]
    }

    #[test]
    fn reference_plan_is_valid_and_reaches_goal() {
        let inst = reference_instance();
        let report = validate_plan(
            &inst.initial_state().unwrap(),
            &inst.goal().unwrap(),
            &reference_plan(),
        );
        assert!(report.valid);
        assert!(report.goal_satisfied);
    }

    #[test]
    fn empty_plan_is_valid_but_misses_goal() {
        let inst = reference_instance();
        let report = validate_plan(&inst.initial_state().unwrap(), &inst.goal().unwrap(), &[]);
        assert!(report.valid);
        assert!(!report.goal_satisfied);
    }

    #[test]
    fn premature_stack_fails_at_step_zero() {
        let inst = reference_instance();
        let plan = vec![BlockAction::Stack(b("red"), b("blue"))];
        let report = validate_plan(&inst.initial_state().unwrap(), &inst.goal().unwrap(), &plan);
        assert!(!report.valid);
        let failure = report.failed_step.unwrap();
        assert_eq!(failure.index, 0);
        assert_eq!(failure.rule, Rule::R8);
    }

    #[test]
    fn bfs_oracle_finds_the_eight_step_plan() {
        let inst = reference_instance();
        let plan = oracle_bfs_plan(&inst.initial_state().unwrap(), &inst.goal().unwrap()).unwrap();
        assert_eq!(plan.len(), 8);
        let report = validate_plan(&inst.initial_state().unwrap(), &inst.goal().unwrap(), &plan);
        assert!(report.valid && report.goal_satisfied);
    }

    #[test]
    fn bfs_oracle_trivial_and_unreachable_cases() {
        let inst = reference_instance();
        let state = inst.initial_state().unwrap();
        // Initial state already satisfies a goal drawn from it.
        let goal = Goal::new(vec![(b("blue"), b("red"))]);
        assert_eq!(oracle_bfs_plan(&state, &goal), Some(vec![]));
        // Contradictory goal: two blocks on the same base.
        let goal = Goal::new(vec![(b("blue"), b("red")), (b("orange"), b("red"))]);
        assert_eq!(oracle_bfs_plan(&state, &goal), None);
    }

    #[test]
    fn canonicalization_removes_stated_noop_pairs() {
        // (unstack b c) (stack a b) (unstack a b) (stack b a)
        //   -> (unstack b c) (stack b a)
        let plan = vec![
            BlockAction::Unstack(b("b"), b("c")),
            BlockAction::Stack(b("a"), b("b")),
            BlockAction::Unstack(b("a"), b("b")),
            BlockAction::Stack(b("b"), b("a")),
        ];
        let expected = vec![
            BlockAction::Unstack(b("b"), b("c")),
            BlockAction::Stack(b("b"), b("a")),
        ];
        assert_eq!(canonicalize_plan(&plan), expected);

        // No cancellable pairs: unchanged.
        assert_eq!(canonicalize_plan(&expected), expected);

        // Repeated cancellation collapses to nothing.
        let churn = vec![
            BlockAction::PutDown(b("a")),
            BlockAction::PickUp(b("a")),
            BlockAction::PutDown(b("a")),
            BlockAction::PickUp(b("a")),
        ];
        assert_eq!(canonicalize_plan(&churn), Vec::<BlockAction>::new());
    }

    #[test]
    fn canonicalization_preserves_final_state() {
        // Insert a stack/unstack churn into the reference plan and check the
        // cleaned plan reaches the same final state as the original.
        let inst = reference_instance();
        let init = inst.initial_state().unwrap();
        let goal = inst.goal().unwrap();
        let mut noisy = reference_plan();
        noisy.insert(1, BlockAction::Unstack(b("orange"), b("blue")));
        noisy.insert(1, BlockAction::Stack(b("orange"), b("blue")));
        let noisy_report = validate_plan(&init, &goal, &noisy);
        assert!(noisy_report.valid);

        let cleaned = canonicalize_plan(&noisy);
        assert_eq!(cleaned, reference_plan());
        let report = validate_plan(&init, &goal, &cleaned);
        assert_eq!(report.final_state, noisy_report.final_state);
        assert!(plans_equivalent(&noisy, &reference_plan()));
    }

    #[test]
    fn renders_match_task_phrasing() {
        let inst = reference_instance();
        assert_eq!(
            inst.render_initial_conditions(),
            "the orange block is clear, the hand is empty, the blue block is on top of the red \
             block, the orange block is on top of the blue block and the red block is on the table"
        );
        assert_eq!(
            inst.render_goal(),
            "the red block on top of the blue block and the orange block on top of the red block"
        );
    }

    #[test]
    fn instance_rejects_inconsistent_declarations() {
        let mut inst = reference_instance();
        inst.init.push(Predicate::Clear(Block::new("red")));
        assert!(inst.initial_state().is_err());

        let mut inst = reference_instance();
        inst.goal.push(Predicate::OnTable(Block::new("red")));
        assert!(inst.goal().is_err());
    }
}
