#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "cabin/core/model.hpp"

namespace cabin {

/// JSON text for a record. Absent optionals are omitted, never null.
std::string encode_record(const TimedRecord& r);

/// Inverse of encode_record. Unknown keys are ignored.
/// Throws ParseError, SchemaError or ValidationError.
TimedRecord decode_record(std::string_view text);

// Object-level conversions, reused by the HTTP API and the session files.
nlohmann::json payload_to_json(const Payload& p);
nlohmann::json record_to_json(const TimedRecord& r);
TimedRecord record_from_json(const nlohmann::json& j);

nlohmann::json fused_row_to_json(const FusedRow& r);
FusedRow fused_row_from_json(const nlohmann::json& j);

nlohmann::json annotation_to_json(const Annotation& a);
Annotation annotation_from_json(const nlohmann::json& j);

nlohmann::json session_meta_to_json(const SessionMeta& m);
SessionMeta session_meta_from_json(const nlohmann::json& j);

// MQTT topic plan:
//   cabin/{session}/{source}/data   per-source records
//   cabin/{session}/fused           fused rows and annotation echoes
//   cabin/{session}/control         reserved
std::string topic_for(std::string_view session_id, Source source);
std::string control_topic(std::string_view session_id);

/// Throws ValidationError when the id is empty or contains '/', '#', '+'.
void validate_session_id(std::string_view session_id);

} // namespace cabin
