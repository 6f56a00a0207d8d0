use serde::{Deserialize, Serialize};

use super::metrics::normalize_tokens;
use crate::llm::{Backend, LlmError, TokenUsage};
use crate::prompts;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub correct: bool,
    pub rationale: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireVerdict {
    rationale: String,
    label: String,
}

fn parse_verdict(raw: &str) -> Result<Verdict, String> {
    let w: WireVerdict = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let correct = match w.label.trim().to_uppercase().as_str() {
        "CORRECT" => true,
        "WRONG" => false,
        other => return Err(format!("label must be CORRECT or WRONG, got {other:?}")),
    };
    Ok(Verdict { correct, rationale: w.rationale })
}

/// Binary verdict on a predicted answer. The mock judge accepts a prediction
/// whose normalized tokens include every gold token.
pub fn judge_answer(question: &str, gold: &str, prediction: &str, backend: &Backend) -> Result<(Verdict, TokenUsage), LlmError> {
    let prompt = prompts::judge(question, gold, prediction);
    match backend {
        Backend::Mock => {
            let p = normalize_tokens(prediction);
            let missing: Vec<String> = normalize_tokens(gold).into_iter().filter(|g| !p.contains(g)).collect();
            let v = if missing.is_empty() {
                Verdict { correct: true, rationale: "every gold token appears in the prediction".into() }
            } else {
                Verdict { correct: false, rationale: format!("prediction lacks {}", missing.join(", ")) }
            };
            let usage = TokenUsage::approx(&prompt, &v.rationale);
            Ok((v, usage))
        }
        Backend::Remote(client) => client.request_json(&prompt, "judge", &prompts::judge_schema(), parse_verdict),
    }
}
