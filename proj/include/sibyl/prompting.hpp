#pragma once

#include <optional>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "sibyl/gateway.hpp"
#include "sibyl/prompt_templates.hpp"
#include "sibyl/table.hpp"

namespace sibyl {

struct PromptPair {
  std::string system;
  std::string user;
};

inline std::string substitute(std::string_view tmpl, std::string_view placeholder,
                              std::string_view value) {
  std::string out(tmpl);
  const std::string needle = "{" + std::string(placeholder) + "}";
  for (std::size_t pos = out.find(needle); pos != std::string::npos;
       pos = out.find(needle, pos + value.size())) {
    out.replace(pos, needle.size(), value);
  }
  return out;
}

enum class ProfileOrigin { Expert, NonExpertControl };

/// A "You are a ..." role description used as the system prompt. Expert
/// profiles are generated once per dataset and reused.
struct ExpertProfile {
  std::string text;
  ProfileOrigin origin = ProfileOrigin::Expert;
};

inline PromptPair build_epi_prompt(const std::string& description) {
  if (description.empty())
    throw std::invalid_argument("build_epi_prompt: description must be nonempty");
  return {std::string(tpl::kEpiSystem), substitute(tpl::kEpiUser, "description", description)};
}

/// One generating call per dataset; the gateway's content-addressed cache
/// makes repeat calls free.
inline ExpertProfile elicit_expert_profile(const TableBundle& bundle, Gateway& gateway,
                                           const std::string& model) {
  const auto prompts = build_epi_prompt(bundle.description);
  const auto ex = gateway.complete(model, prompts.system, prompts.user);
  if (ex.response.empty())
    throw GatewayError(GatewayErrc::EmptyResponse, "EPI returned an empty profile");
  return ExpertProfile{ex.response, ProfileOrigin::Expert};
}

inline ExpertProfile non_expert_profile() {
  return ExpertProfile{std::string(tpl::kNonExpertProfile), ProfileOrigin::NonExpertControl};
}

/// Natural-language row serialization: one `The {name} is {value}.` sentence
/// per column in schema order. The cell being imputed renders as <missing>;
/// other masked cells are omitted entirely, as are natively absent ones.
inline std::string serialize_row(const TableBundle& bundle, int row,
                                 const std::string& target_cell, const MissingnessMask& mask) {
  if (!mask.contains(row, target_cell))
    throw TableError(TableErrc::SchemaMismatch,
                     "serialize_row: cell (" + std::to_string(row) + ", " + target_cell +
                         ") is not masked");
  std::string ds;
  for (int c = 0; c < bundle.p(); ++c) {
    const auto& name = bundle.schema[c].name;
    std::string value;
    if (name == target_cell) {
      value = "<missing>";
    } else if (mask.contains(row, name) || bundle.rows[row][c].is_absent()) {
      continue;
    } else {
      value = bundle.cell_text(row, c);
    }
    if (!ds.empty()) ds += " ";
    ds += "The " + name + " is " + value + ".";
  }
  return ds;
}

/// Assemble the imputation ask: system prompt is the expert profile (plus an
/// optional configured suffix), user prompt is the task template around the
/// serialized row.
inline PromptPair build_ts_prompt(const ExpertProfile& profile, const std::string& ds,
                                  const std::string& system_suffix = {}) {
  if (profile.text.empty() || ds.empty())
    throw std::invalid_argument("build_ts_prompt: profile and data must be nonempty");
  return {profile.text + system_suffix, substitute(tpl::kTaskSpecUser, "data", ds)};
}

enum class ImputeParseErrc { NoJsonFound, TypeMismatch, UnknownCategory };

inline const char* to_string(ImputeParseErrc e) {
  switch (e) {
    case ImputeParseErrc::NoJsonFound: return "NoJsonFound";
    case ImputeParseErrc::TypeMismatch: return "TypeMismatch";
    case ImputeParseErrc::UnknownCategory: return "UnknownCategory";
  }
  return "?";
}

struct ImputeParseResult {
  std::optional<Cell> value;
  ImputeParseErrc error = ImputeParseErrc::NoJsonFound;
  std::string detail;
  bool ok() const { return value.has_value(); }
};

namespace detail {

/// Scan for balanced top-level JSON objects, string-aware. Returns each
/// candidate substring in order of appearance.
inline std::vector<std::string> balanced_json_objects(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      ++i;
      continue;
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t j = i;
    for (; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) escaped = false;
        else if (c == '\\') escaped = true;
        else if (c == '"') in_string = false;
      } else if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          out.push_back(text.substr(i, j - i + 1));
          break;
        }
      }
    }
    i = (depth == 0 && j < text.size()) ? j + 1 : i + 1;
  }
  return out;
}

}  // namespace detail

/// Pull the first JSON object carrying an "output" key out of a free-form
/// reply and coerce it to the column's value space. Continuous columns demand
/// a finite number (numeric strings are accepted); categorical columns match
/// labels case-insensitively after trimming, with no fuzzy matching.
inline ImputeParseResult parse_imputation_response(const std::string& response,
                                                   const ColumnSchema& column) {
  ImputeParseResult result;
  nlohmann::json payload;
  bool found = false;
  for (const auto& candidate : detail::balanced_json_objects(response)) {
    auto j = nlohmann::json::parse(candidate, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("output")) continue;
    payload = j["output"];
    found = true;
    break;
  }
  if (!found) {
    result.error = ImputeParseErrc::NoJsonFound;
    result.detail = "no JSON object with an \"output\" key";
    return result;
  }

  if (column.kind == ColumnKind::Continuous) {
    double v = 0.0;
    if (payload.is_number()) {
      v = payload.get<double>();
    } else if (payload.is_string()) {
      auto parsed = parse_number(payload.get<std::string>());
      if (!parsed) {
        result.error = ImputeParseErrc::TypeMismatch;
        result.detail = "non-numeric string for continuous column";
        return result;
      }
      v = *parsed;
    } else {
      result.error = ImputeParseErrc::TypeMismatch;
      result.detail = "output is not a number";
      return result;
    }
    if (!std::isfinite(v)) {
      result.error = ImputeParseErrc::TypeMismatch;
      result.detail = "non-finite number";
      return result;
    }
    result.value = Cell::number(v);
    return result;
  }

  std::string label;
  if (payload.is_string()) label = payload.get<std::string>();
  else if (payload.is_number_integer()) label = std::to_string(payload.get<long long>());
  else if (payload.is_number()) label = format_number(payload.get<double>());
  else {
    result.error = ImputeParseErrc::TypeMismatch;
    result.detail = "output is not a category label";
    return result;
  }
  auto idx = column.category_index(label);
  if (!idx) {
    result.error = ImputeParseErrc::UnknownCategory;
    result.detail = "UnknownCategory: '" + label + "'";
    return result;
  }
  result.value = Cell::label(*idx);
  return result;
}

}  // namespace sibyl
