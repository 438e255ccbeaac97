#pragma once

#include <string_view>

/// Versioned prompt text resources. Placeholders in curly braces are
/// substituted by the builders in prompting.hpp / elicitation.hpp; everything
/// else is emitted byte-for-byte, so edit with care: downstream replay caches
/// key on the exact prompt text.
namespace sibyl::tpl {

inline constexpr std::string_view kEpiSystem =
    "I am going to give you a description of a dataset. Please read it and then tell me which "
    "hypothetical persona would be the best domain expert on the content of the data set if I "
    "had questions about specific variables, attributes or properties.\n"
    "\n"
    "I don't need a data scientist or machine learning expert, and I don't have questions about "
    "the analysis of the data but about specific attributes and values.\n"
    "\n"
    "Please do not give me a list. Just give me a detailed description of a (single) person who "
    "really knows a lot about the field in which the dataset was generated.\n"
    "\n"
    "Do not use your knowledge about the author of the data record as a guide. Do not mention "
    "the dataset or anything about it. Do not explain what you do. Just give the description "
    "and be concise. No Intro like 'An expert would be'.";

inline constexpr std::string_view kEpiUser =
    "Here is the description of the dataset:\n"
    "\n"
    "{description}\n"
    "\n"
    "Remember: Do not mention the dataset in your description. Don't explain what you do. Just "
    "give me a concise description of a hypthetical person, that would be an expert on this.\n"
    "\n"
    "Formulate this as an instruction like \"You are an ...\".";

inline constexpr std::string_view kNonExpertProfile =
    "You are an individual with no academic or professional background related to the dataset's "
    "field. Your interests and expertise lie completely outside of the dataset's domain, such as "
    "a chef specializing in Italian cuisine when the dataset is about astrophysics. You lack "
    "familiarity with the technical jargon, concepts, and methodologies pertinent to the "
    "dataset. Your approach to questions about specific variables, attributes, or properties is "
    "based on general knowledge or common sense, without any specialized understanding of the "
    "dataset's context or significance. You are more inclined to provide answers based on "
    "personal opinions or unrelated experiences rather than data-driven insights.";

inline constexpr std::string_view kTaskSpecUser =
    "THE PROBLEM: We would like to analyze a data set, but unfortunately this data set has some "
    "missing values.\n"
    "\n"
    "###\n"
    "\n"
    "YOUR TASK: Please use your years of experience and the knowledge you have acquired in the "
    "course of your work to provide an estimate of what value the missing value (marked as "
    "<missing>) in the following row of the dataset would most likely have.\n"
    "\n"
    "{data}\n"
    "\n"
    "IMPORTANT: Please do not provide any explanation or clarification. Only provide single "
    "value in a JSON format.\n"
    "RESPONSE FORMAT: {\"output\": value}";

/// Appended to the user prompt on the one retry after a parse failure.
inline constexpr std::string_view kJsonRetrySuffix = "Respond with only the JSON object.";

inline constexpr std::string_view kElicitUser =
    "You are being asked to provide expert-informed informative prior distributions for a "
    "Bayesian data analysis. You give results in pseudocode Stan distributions, for example "
    "`{example}`. Give a knowledge-based prior distribution for {question} in this form. "
    "Give your answer as a single {family} distribution{support}. Surround your answer with "
    "`backticks`. Do not give an explanation, just give the distribution.";

inline constexpr std::string_view kShelfFraming =
    "Use the Sheffield elicitation framework, combined with your own knowledge gathered from "
    "your training data, to arrive at your answer.";

inline constexpr std::string_view kRouletteFraming =
    "Use the histogram method: imagine allocating virtual chips to equally spaced bins to form "
    "a histogram of your beliefs, then summarize that histogram as a parametric distribution.";

inline constexpr std::string_view kConferenceInstruction =
    "Do not ask for further input: you may converse with yourself or simulate a discussion "
    "among experts.";

/// Appended on the one retry after a distribution parse failure.
inline constexpr std::string_view kDistributionRetrySuffix =
    "Respond with only the distribution surrounded by `backticks`.";

}  // namespace sibyl::tpl
