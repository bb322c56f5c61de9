use serde_json::{Map, Value};

/// Returns the first JSON object embedded in `text` that `accept` maps to
/// `Some`. Prose, code fences and unrelated objects around it are skipped.
pub(crate) fn find_object<T>(text: &str, mut accept: impl FnMut(Map<String, Value>) -> Option<T>) -> Option<T> {
    for (start, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            if let Some(found) = accept(obj) {
                return Some(found);
            }
        }
    }
    None
}
