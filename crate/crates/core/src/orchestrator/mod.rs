//! Orchestration of one invocation (plan, act, evaluate, retry) and of a
//! session of sequential invocations with client- and agent-side memory.

use std::sync::Arc;

use thiserror::Error;

use crate::agents::{
    run_actor, run_evaluator, run_planner, AgentContext, AgentError, Evaluation,
    WorkflowEnvelope,
};
use crate::gateway::ChatBackend;
use crate::host::Clock;
use crate::mcp::ToolRouter;
use crate::memory::{
    persist_invocation, session_messages, ClientMemory, MemoryConfig, MemoryError, MemoryStore,
};

/// Marker recorded in client memory for invocations that did not finish.
pub const DNF_ANSWER: &str = "<DNF>";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvocationStatus {
    Success,
    DidNotFinish,
}

impl InvocationStatus {
    pub fn label(&self) -> &'static str {
        match self {
            InvocationStatus::Success => "success",
            InvocationStatus::DidNotFinish => "dnf",
        }
    }
}

#[derive(Debug)]
pub struct InvocationOutcome {
    pub envelope: WorkflowEnvelope,
    pub status: InvocationStatus,
}

impl InvocationOutcome {
    /// The answer recorded client-side: the final response, or the DNF
    /// marker.
    pub fn client_answer(&self) -> String {
        match self.status {
            InvocationStatus::Success => self
                .envelope
                .final_response
                .clone()
                .unwrap_or_else(|| DNF_ANSWER.to_string()),
            InvocationStatus::DidNotFinish => DNF_ANSWER.to_string(),
        }
    }
}

#[derive(Debug)]
pub struct SessionOutcome {
    pub session_id: String,
    pub invocations: Vec<InvocationOutcome>,
    pub client_memory: ClientMemory,
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
}

/// Everything an invocation needs: model access, tool routing, the memory
/// store, a clock and the active configuration.
pub struct Orchestrator {
    pub gateway: Arc<dyn ChatBackend>,
    pub router: Arc<ToolRouter>,
    pub store: Arc<dyn MemoryStore>,
    pub clock: Arc<dyn Clock>,
    pub config: MemoryConfig,
    pub max_iterations: u32,
    pub superstep_cap: u32,
}

impl Orchestrator {
    fn agent_context(&self) -> AgentContext<'_> {
        AgentContext {
            gateway: self.gateway.as_ref(),
            router: self.router.as_ref(),
            clock: self.clock.as_ref(),
            agent_memory: self.config.agent_memory,
            max_iterations: self.max_iterations,
            superstep_cap: self.superstep_cap,
        }
    }

    /// Run one query through the plan/act/evaluate loop, retrying up to the
    /// iteration budget, then persist what the invocation added (when agent
    /// memory is on; failed invocations persist too).
    pub fn run_invocation(
        &self,
        session_id: &str,
        invocation_id: &str,
        query: &str,
        client_memory: &ClientMemory,
    ) -> Result<InvocationOutcome, OrchestratorError> {
        let mut env = WorkflowEnvelope::new(session_id, invocation_id, query);
        if self.config.client_memory && !client_memory.is_empty() {
            env.client_memory_block = client_memory.render();
        }
        if self.config.agent_memory {
            let records = self.store.load_session(session_id)?;
            env.injected_memory = session_messages(&records);
        }

        let ctx = self.agent_context();
        for iteration in 1..=self.max_iterations {
            env.iteration_count = iteration;
            run_planner(&ctx, &mut env)?;
            let finished = run_actor(&ctx, &mut env)?;
            if !finished {
                env.evaluation = Some(Evaluation {
                    success: false,
                    needs_retry: false,
                    reason: "superstep cap reached".to_string(),
                    feedback: String::new(),
                });
                break;
            }
            run_evaluator(&ctx, &mut env)?;
            let evaluation = env.evaluation.as_ref().expect("evaluator ran");
            if evaluation.success || !evaluation.needs_retry {
                break;
            }
            env.feedback = Some(evaluation.feedback.clone());
        }

        let status = if env.evaluation.as_ref().is_some_and(|e| e.success) {
            InvocationStatus::Success
        } else {
            InvocationStatus::DidNotFinish
        };

        if self.config.agent_memory {
            let mut working = env.injected_memory.clone();
            working.extend(env.transcript.iter().cloned());
            let answer = match status {
                InvocationStatus::Success => {
                    env.final_response.clone().unwrap_or_default()
                }
                InvocationStatus::DidNotFinish => DNF_ANSWER.to_string(),
            };
            persist_invocation(
                self.store.as_ref(),
                session_id,
                invocation_id,
                query,
                &answer,
                status.label(),
                &working,
            )?;
        }

        Ok(InvocationOutcome {
            envelope: env,
            status,
        })
    }

    /// Run the queries of one session in order. A DNF records its marker in
    /// client memory and the session continues.
    pub fn run_session(
        &self,
        session_id: &str,
        queries: &[String],
    ) -> Result<SessionOutcome, OrchestratorError> {
        let mut client_memory = ClientMemory::new();
        let mut invocations = Vec::with_capacity(queries.len());
        for (index, query) in queries.iter().enumerate() {
            let invocation_id = format!("{:04}", index + 1);
            let outcome =
                self.run_invocation(session_id, &invocation_id, query, &client_memory)?;
            client_memory.push(query, &outcome.client_answer());
            invocations.push(outcome);
        }
        Ok(SessionOutcome {
            session_id: session_id.to_string(),
            invocations,
            client_memory,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{MAX_ITERATIONS, SUPERSTEP_CAP};
    use crate::fixtures::{build_all, Corpus, FixtureShared};
    use crate::gateway::{RuleBasedMock, RuleSet};
    use crate::host::ManualClock;
    use crate::mcp::initialize_session;
    use crate::mcp::InProcessTransport;
    use crate::memory::InMemoryStore;

    fn orchestrator(config: MemoryConfig, rules: RuleSet) -> Orchestrator {
        let clock = Arc::new(ManualClock::new());
        let shared = FixtureShared {
            clock: clock.clone(),
            settings: config.host_settings(),
            ..FixtureShared::in_memory()
        };
        let corpus = Corpus::bundled();
        let sessions = build_all(&corpus, &shared)
            .into_iter()
            .map(|server| {
                Arc::new(
                    initialize_session(Arc::new(InProcessTransport::new(server)) as Arc<_>)
                        .unwrap(),
                )
            })
            .collect();
        Orchestrator {
            gateway: Arc::new(RuleBasedMock::new(rules)),
            router: Arc::new(ToolRouter::new(sessions).unwrap()),
            store: Arc::new(InMemoryStore::new()),
            clock,
            config,
            max_iterations: MAX_ITERATIONS,
            superstep_cap: SUPERSTEP_CAP,
        }
    }

    fn research_queries() -> Vec<String> {
        let corpus = Corpus::bundled();
        let title = &corpus.papers().next().unwrap().title;
        vec![
            format!(
                "Summarize the introduction and core contributions of the paper titled \
                 '{title}'."
            ),
            "Describe its methodology and analysis.".to_string(),
            "Summarize its conclusions, implications and future work.".to_string(),
        ]
    }

    #[test]
    fn research_session_with_agent_memory_reuses_downloads() {
        let orchestrator = orchestrator(MemoryConfig::M, RuleSet::research());
        let outcome = orchestrator
            .run_session("rs-m", &research_queries())
            .unwrap();
        let calls: Vec<u64> = outcome
            .invocations
            .iter()
            .map(|i| i.envelope.tool_calls)
            .collect();
        assert_eq!(calls, [2, 1, 1]);
        assert!(outcome
            .invocations
            .iter()
            .all(|i| i.status == InvocationStatus::Success));
        // One persisted record per invocation.
        assert_eq!(
            orchestrator.store.load_session("rs-m").unwrap().len(),
            3
        );
        // Later invocations store only their own additions.
        let records = orchestrator.store.load_session("rs-m").unwrap();
        assert!(records[1].messages.len() < records[0].messages.len());
    }

    #[test]
    fn research_session_without_client_memory_cannot_resolve_followups() {
        let orchestrator = orchestrator(MemoryConfig::E, RuleSet::research());
        let outcome = orchestrator
            .run_session("rs-e", &research_queries())
            .unwrap();
        assert_eq!(outcome.invocations[0].status, InvocationStatus::Success);
        assert_eq!(
            outcome.invocations[1].status,
            InvocationStatus::DidNotFinish
        );
        assert_eq!(outcome.invocations[1].envelope.iteration_count, 3);
        assert_eq!(outcome.invocations[1].client_answer(), DNF_ANSWER);
        assert_eq!(
            outcome.invocations[2].status,
            InvocationStatus::DidNotFinish
        );
        // No agent memory configured, nothing persisted.
        assert!(orchestrator.store.load_session("rs-e").unwrap().is_empty());
    }

    #[test]
    fn log_session_call_counts_by_config() {
        let queries: Vec<String> = {
            let corpus = Corpus::bundled();
            let log = corpus.logs().next().unwrap();
            let keyword = log.keyword.clone().unwrap();
            vec![
                format!(
                    "Count the occurrences of error states '{keyword}' in the log file \
                     '{}'.",
                    log.title
                ),
                "Compute the mean and standard deviation of the timestamps of those error \
                 states."
                    .to_string(),
                "Report the min, max, mean and median of the timestamps and plot them."
                    .to_string(),
            ]
        };
        let expectations = [
            (MemoryConfig::N, vec![2, 3, 6]),
            (MemoryConfig::M, vec![2, 2, 4]),
        ];
        for (config, expected) in expectations {
            let orchestrator = orchestrator(config, RuleSet::logs());
            let outcome = orchestrator.run_session("la", &queries).unwrap();
            let calls: Vec<u64> = outcome
                .invocations
                .iter()
                .map(|i| i.envelope.tool_calls)
                .collect();
            assert_eq!(calls, expected, "config {}", config.label());
            assert!(outcome
                .invocations
                .iter()
                .all(|i| i.status == InvocationStatus::Success));
        }
    }

    #[test]
    fn cache_configuration_turns_repeat_calls_into_hits() {
        let orchestrator = orchestrator(MemoryConfig::C, RuleSet::research());
        let outcome = orchestrator
            .run_session("rs-c", &research_queries())
            .unwrap();
        // Without agent memory every invocation re-downloads; with caching
        // on, the repeats are served from the invocation cache.
        let hits: u64 = outcome
            .invocations
            .iter()
            .map(|i| i.envelope.cache_hits)
            .sum();
        assert_eq!(hits, 2);
    }
}
