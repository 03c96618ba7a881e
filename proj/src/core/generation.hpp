#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace prag {

enum class GeneratorKind { kMockReader, kHttpLlm };

std::string_view to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(std::string_view s);

// RAG answering prompt with [context] and [question] slots.
extern const char* const kDefaultSystemPrompt;
inline constexpr const char* kDefaultSystemMessage = "You are a helpful assistant.";
inline constexpr const char* kUnknownAnswer = "I don't know";

struct GeneratorConfig {
  GeneratorKind kind = GeneratorKind::kMockReader;
  std::string model = "gpt-4";
  double temperature = 0.1;           // RAG answering
  double attacker_temperature = 1.0;  // crafting I
  std::string endpoint;               // http://host[:port]/path
  std::string auth_header;            // "Header-Name: value"
  std::string system_prompt = kDefaultSystemPrompt;
  std::string system_message = kDefaultSystemMessage;
  int timeout_ms = 60000;
  int max_retries = 3;
  int initial_backoff_ms = 500;
  double backoff_factor = 2.0;
  int max_concurrency = 4;

  // Throws ConfigError when a slot is missing or repeated, or an HTTP field
  // is unusable.
  void validate() const;
};

std::string render_prompt(const GeneratorConfig& config, std::string_view question,
                          std::span<const std::string> contexts);

// Case-folded, whitespace-collapsed, surrounding punctuation stripped.
std::string normalize_question(std::string_view question);

// Answers X asserted by `context` for `question` through the statement
// "the answer to <Q'> is <X>." where Q' normalizes equal to the question.
std::vector<std::string> extract_assertions(std::string_view context, std::string_view question);

// Majority vote over contexts in rank order; ties go to the answer whose
// asserting context ranks best. No assertion yields "I don't know".
std::string mock_read(std::string_view question, std::span<const std::string> contexts);

std::string answer(const GeneratorConfig& config, std::string_view question,
                   std::span<const std::string> contexts);

// One chat-completions round trip: system_message + `user_content`.
// Retries transport failures, 408, 429, and 5xx with exponential backoff.
std::string chat_complete(const GeneratorConfig& config, std::string_view user_content,
                          double temperature);

nlohmann::json chat_request_body(const GeneratorConfig& config, std::string_view user_content,
                                 double temperature);

// Reads choices[0].message.content; throws ProtocolError otherwise.
std::string parse_chat_response(std::string_view body);

}  // namespace prag
