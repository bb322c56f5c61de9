use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::TrajectoryRecord;

use super::{PromptRenderer, TextError};

/// One supervised example in chat-messages form, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SftExample {
    pub trajectory_id: String,
    pub system: String,
    pub user: String,
    pub assistant: String,
}

#[derive(Serialize, Deserialize)]
struct Message {
    role: String,
    content: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    id: String,
    messages: Vec<Message>,
}

pub fn gold_answer(label: u8) -> &'static str {
    if label == crate::dataset::RISKY {
        "RISK: HIGH"
    } else {
        "RISK: LOW"
    }
}

pub fn sft_example(renderer: &PromptRenderer, record: &TrajectoryRecord) -> SftExample {
    let prompt = renderer.task1(record);
    SftExample {
        trajectory_id: record.trajectory_id.clone(),
        system: prompt.system_text,
        user: prompt.user_text,
        assistant: gold_answer(record.risk_label).to_string(),
    }
}

/// Writes one Task 1 example per record and returns the number written.
pub fn export_sft<'a, W: Write>(
    renderer: &PromptRenderer,
    records: impl IntoIterator<Item = &'a TrajectoryRecord>,
    mut out: W,
) -> Result<usize, TextError> {
    let mut n = 0;
    for record in records {
        let ex = sft_example(renderer, record);
        let line = Line {
            id: ex.trajectory_id,
            messages: [("system", ex.system), ("user", ex.user), ("assistant", ex.assistant)]
                .into_iter()
                .map(|(role, content)| Message {
                    role: role.to_string(),
                    content,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &line).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
        n += 1;
    }
    out.flush()?;
    Ok(n)
}

pub fn read_sft<R: BufRead>(input: R) -> Result<Vec<SftExample>, TextError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| TextError::Sft { line: i + 1, message };
        let parsed: Line = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let roles: Vec<&str> = parsed.messages.iter().map(|m| m.role.as_str()).collect();
        if roles != ["system", "user", "assistant"] {
            return Err(err(format!("expected system/user/assistant messages, got {roles:?}")));
        }
        let mut contents = parsed.messages.into_iter().map(|m| m.content);
        out.push(SftExample {
            trajectory_id: parsed.id,
            system: contents.next().unwrap(),
            user: contents.next().unwrap(),
            assistant: contents.next().unwrap(),
        });
    }
    Ok(out)
}
