//! Environment adapters: `reset(task) -> observation`, `step(action) ->
//! (observation, done)`.

use serde::{Deserialize, Serialize};

/// One task of a stream or group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamTask {
    pub id: String,
    pub text: String,
    /// Benchmark subset (e.g. a task family) for per-subset success rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
    /// Reference actions used by the bundled environments.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solution: Vec<String>,
}

impl StreamTask {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            subset: None,
            solution: Vec::new(),
        }
    }

    pub fn with_solution<I, S>(mut self, actions: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.solution = actions.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_subset(mut self, subset: impl Into<String>) -> Self {
        self.subset = Some(subset.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepResult {
    pub observation: String,
    pub done: bool,
}

pub trait Environment: Send {
    fn reset(&mut self, task: &StreamTask) -> String;
    fn step(&mut self, action: &str) -> StepResult;
    /// Ground-truth outcome of the episode so far.
    fn success(&self) -> bool;
}

pub trait EnvironmentFactory: Send + Sync {
    fn create(&self, task: &StreamTask) -> Box<dyn Environment>;
}

impl<F> EnvironmentFactory for F
where
    F: Fn(&StreamTask) -> Box<dyn Environment> + Send + Sync,
{
    fn create(&self, task: &StreamTask) -> Box<dyn Environment> {
        self(task)
    }
}

fn same_action(a: &str, b: &str) -> bool {
    a.trim().eq_ignore_ascii_case(b.trim())
}

/// A corridor of rooms. The task's `solution[i]` moves from room `i` to
/// room `i + 1`; any other action leaves the agent in place. Reaching the
/// last room ends the episode successfully.
#[derive(Debug, Clone, Default)]
pub struct TextMaze {
    solution: Vec<String>,
    room: usize,
}

impl TextMaze {
    fn describe(&self) -> String {
        if self.room >= self.solution.len() {
            return "You reached the goal.".into();
        }
        format!("You are in room {}. Exits lead onward.", self.room + 1)
    }
}

impl Environment for TextMaze {
    fn reset(&mut self, task: &StreamTask) -> String {
        self.solution = task.solution.clone();
        self.room = 0;
        format!("{}\n{}", task.text, self.describe())
    }

    fn step(&mut self, action: &str) -> StepResult {
        if self.success() {
            return StepResult {
                observation: self.describe(),
                done: true,
            };
        }
        if same_action(action, &self.solution[self.room]) {
            self.room += 1;
            StepResult {
                observation: self.describe(),
                done: self.success(),
            }
        } else {
            StepResult {
                observation: format!("Nothing happens. {}", self.describe()),
                done: false,
            }
        }
    }

    fn success(&self) -> bool {
        self.room >= self.solution.len()
    }
}

/// One answer per task: correct iff it equals `solution[0]`
/// (case-insensitive, trimmed).
#[derive(Debug, Clone, Default)]
pub struct SingleTurn {
    answer: Option<String>,
    correct: bool,
}

impl Environment for SingleTurn {
    fn reset(&mut self, task: &StreamTask) -> String {
        self.answer = task.solution.first().cloned();
        self.correct = false;
        task.text.clone()
    }

    fn step(&mut self, action: &str) -> StepResult {
        self.correct = self.answer.as_deref().is_some_and(|a| same_action(a, action));
        StepResult {
            observation: if self.correct { "Correct." } else { "Incorrect." }.into(),
            done: true,
        }
    }

    fn success(&self) -> bool {
        self.correct
    }
}

/// The bundled environment kinds, selectable from configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    #[default]
    TextMaze,
    SingleTurn,
}

impl EnvironmentFactory for EnvironmentKind {
    fn create(&self, _task: &StreamTask) -> Box<dyn Environment> {
        match self {
            EnvironmentKind::TextMaze => Box::new(TextMaze::default()),
            EnvironmentKind::SingleTurn => Box::new(SingleTurn::default()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maze_advances_only_on_correct_actions() {
        let task = StreamTask::new("t", "find the key").with_solution(["go north", "take key"]);
        let mut env = TextMaze::default();
        env.reset(&task);
        assert!(!env.step("go south").done);
        assert!(!env.step("GO NORTH ").done);
        let last = env.step("take key");
        assert!(last.done && env.success());
    }

    #[test]
    fn empty_maze_is_already_solved() {
        let mut env = TextMaze::default();
        env.reset(&StreamTask::new("t", "nothing to do"));
        assert!(env.success());
        assert!(env.step("wait").done);
    }

    #[test]
    fn single_turn_grades_one_answer() {
        let task = StreamTask::new("q", "2+2?").with_solution(["4"]);
        let mut env = SingleTurn::default();
        env.reset(&task);
        assert!(env.step(" 4 ").done);
        assert!(env.success());
        env.reset(&task);
        env.step("5");
        assert!(!env.success());
    }
}
