#include "rite/prompt.hpp"

#include <algorithm>
#include <cctype>

#include "rite/error.hpp"
#include "rite/utf8.hpp"

namespace rite {
namespace {

TemplateSegment lit(std::string text) { return {SegmentRole::Literal, std::move(text)}; }
TemplateSegment subject() { return {SegmentRole::SubjectText, {}}; }
TemplateSegment reasoning_slot() { return {SegmentRole::ReasoningSlot, {}}; }

std::string_view lower_noun(SubjectKind kind) {
  return kind == SubjectKind::Query ? "query" : "passage";
}

std::string_view title_noun(SubjectKind kind) {
  return kind == SubjectKind::Query ? "Query" : "Passage";
}

std::string pr_instruction(SubjectKind kind) {
  return "Use one most important word to represent the " + std::string(lower_noun(kind)) +
         " in a retrieval task. Make sure your word is in lowercase. The word is: \"";
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, TemplateFamily family, SubjectKind subject_kind,
                               std::vector<TemplateSegment> segments)
    : name_(std::move(name)),
      family_(family),
      subject_kind_(subject_kind),
      segments_(std::move(segments)) {
  const std::size_t subjects = subject_count();
  const std::size_t expected = family_ == TemplateFamily::Echo ? 2 : 1;
  if (subjects != expected) {
    throw Error(ErrorCode::InvalidArgument,
                "template " + name_ + " has " + std::to_string(subjects) + " subject segments");
  }
  for (const auto& seg : segments_) {
    if (seg.role == SegmentRole::Literal && seg.text.empty()) {
      throw Error(ErrorCode::InvalidArgument, "template " + name_ + " has an empty literal");
    }
    if (seg.role != SegmentRole::Literal && !seg.text.empty()) {
      throw Error(ErrorCode::InvalidArgument, "template " + name_ + " slot carries text");
    }
  }
}

std::size_t PromptTemplate::subject_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(segments_.begin(), segments_.end(), [](const auto& s) {
    return s.role == SegmentRole::SubjectText;
  }));
}

bool PromptTemplate::has_reasoning_slot() const noexcept {
  return std::any_of(segments_.begin(), segments_.end(),
                     [](const auto& s) { return s.role == SegmentRole::ReasoningSlot; });
}

// "Rewrite the query: x, rewritten query: x"
PromptTemplate echo_template(SubjectKind kind) {
  const std::string noun(lower_noun(kind));
  return PromptTemplate("echo_" + noun, TemplateFamily::Echo, kind,
                        {lit("Rewrite the " + noun + ": "), subject(),
                         lit(", rewritten " + noun + ": "), subject()});
}

PromptTemplate pr_template(SubjectKind kind) {
  return PromptTemplate("pr_" + std::string(lower_noun(kind)), TemplateFamily::PromptReps, kind,
                        {lit(std::string(title_noun(kind)) + ": "), subject(),
                         lit(". " + pr_instruction(kind))});
}

PromptTemplate reasoning_template(ReasoningVariant variant) {
  std::string instruction;
  switch (variant) {
    case ReasoningVariant::P1:
      instruction =
          "After thinking step by step, provide a better search query for search engine to "
          "answer the given question.";
      break;
    case ReasoningVariant::P2:
      instruction =
          "Think step by step to reason about what is the essential problem of this question, "
          "and what should be included in the relevant documents. Make your response concise.";
      break;
    case ReasoningVariant::P3:
      instruction =
          "After thinking step by step, provide a better search query for search engine to "
          "answer the given question, and identify what should be included in the relevant "
          "documents. Make your response concise.";
      break;
  }
  std::string name = "reasoning_" + std::string(to_string(variant));
  std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
  return PromptTemplate(std::move(name), TemplateFamily::Reasoning, SubjectKind::Query,
                        {lit("Query: "), subject(), lit(". " + instruction)});
}

// "[Reasoning text] Rewrite the query: x, rewritten query: x"
PromptTemplate rite_echo_template() {
  return PromptTemplate("rite_echo", TemplateFamily::Echo, SubjectKind::Query,
                        {reasoning_slot(), lit(" Rewrite the query: "), subject(),
                         lit(", rewritten query: "), subject()});
}

// "Query: x. [Reasoning text] Use one most important word ..."
PromptTemplate rite_pr_template() {
  return PromptTemplate("rite_pr", TemplateFamily::PromptReps, SubjectKind::Query,
                        {lit("Query: "), subject(), lit(". "), reasoning_slot(),
                         lit(" " + pr_instruction(SubjectKind::Query))});
}

AssembledPrompt assemble(const PromptTemplate& tpl, std::string_view subject_text,
                         std::optional<std::string_view> reasoning) {
  if (subject_text.empty()) {
    throw Error(ErrorCode::EmptySubject, "template " + tpl.name());
  }
  if (!utf8::is_valid(subject_text)) {
    throw Error(ErrorCode::InvalidArgument, "subject is not valid UTF-8");
  }
  std::string trimmed;
  if (tpl.has_reasoning_slot()) {
    if (!reasoning) throw Error(ErrorCode::MissingReasoning, "template " + tpl.name());
    trimmed = utf8::trim_whitespace(*reasoning);
    if (trimmed.empty()) {
      throw Error(ErrorCode::MissingReasoning, "reasoning is empty after trimming");
    }
    if (!utf8::is_valid(trimmed)) {
      throw Error(ErrorCode::InvalidArgument, "reasoning is not valid UTF-8");
    }
  } else if (reasoning) {
    throw Error(ErrorCode::UnexpectedReasoning, "template " + tpl.name());
  }

  AssembledPrompt out;
  out.spans.reserve(tpl.segments().size());
  std::size_t subjects_seen = 0;
  for (const auto& seg : tpl.segments()) {
    const std::size_t start = out.text.size();
    switch (seg.role) {
      case SegmentRole::Literal: out.text += seg.text; break;
      case SegmentRole::SubjectText: out.text += subject_text; break;
      case SegmentRole::ReasoningSlot: out.text += trimmed; break;
    }
    const ByteSpan span{start, out.text.size()};
    out.spans.push_back(span);
    if (seg.role == SegmentRole::SubjectText && ++subjects_seen == 2) {
      out.second_subject_span = span;
    }
    if (seg.role == SegmentRole::ReasoningSlot) out.reasoning_span = span;
  }
  return out;
}

}  // namespace rite
