#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rite/types.hpp"

namespace rite {

enum class SubjectKind { Query, Passage };

enum class SegmentRole { Literal, SubjectText, ReasoningSlot };

// Echo: the subject appears twice and the second occurrence is pooled.
// PromptReps: the subject appears once and the last prompt token is pooled.
// Reasoning: a generation prompt, never embedded.
enum class TemplateFamily { Echo, PromptReps, Reasoning };

struct TemplateSegment {
  SegmentRole role = SegmentRole::Literal;
  std::string text;  // Literal only

  friend bool operator==(const TemplateSegment&, const TemplateSegment&) = default;
};

class PromptTemplate {
 public:
  PromptTemplate(std::string name, TemplateFamily family, SubjectKind subject_kind,
                 std::vector<TemplateSegment> segments);

  const std::string& name() const noexcept { return name_; }
  TemplateFamily family() const noexcept { return family_; }
  SubjectKind subject_kind() const noexcept { return subject_kind_; }
  const std::vector<TemplateSegment>& segments() const noexcept { return segments_; }

  std::size_t subject_count() const noexcept;
  bool has_reasoning_slot() const noexcept;

 private:
  std::string name_;
  TemplateFamily family_;
  SubjectKind subject_kind_;
  std::vector<TemplateSegment> segments_;
};

struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

// Rendered prompt. spans[i] is the byte range of template segment i; the
// spans are ordered, disjoint, and tile `text` exactly.
struct AssembledPrompt {
  std::string text;
  std::vector<ByteSpan> spans;
  std::optional<ByteSpan> second_subject_span;  // Echo family only
  std::optional<ByteSpan> reasoning_span;

  std::string_view slice(ByteSpan span) const {
    return std::string_view(text).substr(span.start, span.size());
  }
};

PromptTemplate echo_template(SubjectKind kind);
PromptTemplate pr_template(SubjectKind kind);
PromptTemplate reasoning_template(ReasoningVariant variant);
PromptTemplate rite_echo_template();
PromptTemplate rite_pr_template();

// Binds the subject (and reasoning, for RITE templates) into the template.
// Reasoning is whitespace-trimmed first and must be non-empty afterwards.
// Errors: EmptySubject, MissingReasoning, UnexpectedReasoning, and
// InvalidArgument for input that is not valid UTF-8.
AssembledPrompt assemble(const PromptTemplate& tpl, std::string_view subject,
                         std::optional<std::string_view> reasoning = std::nullopt);

}  // namespace rite
