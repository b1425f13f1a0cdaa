#include "qaguide/prompts.hpp"

#include <fstream>
#include <sstream>

#include "qaguide/error.hpp"
#include "qaguide/text.hpp"

namespace qaguide {

namespace {

constexpr const char* kDescription =
    "Context: {context}\n"
    "\n"
    "Describe character {character} from book {book} based on the given context.\n"
    "Return your output as a single paragraph (close to {length} words) including the "
    "important information.";

constexpr const char* kDescriptionNoContext =
    "Describe character {character} from book {book}.\n"
    "Return your output as a single paragraph (close to {length} words) including the "
    "important information.";

constexpr const char* kQaGeneration =
    "Context: {context}\n"
    "\n"
    "Your task is to generate questions answer pairs about character: {character} from book: "
    "{book} given the above chunk of the book. You should focus on understanding aspects of the "
    "character (e.g., role, relationships, personality, events) that are mentioned in the "
    "context. Each qa-pair should be labelled as role, relationship, personality, event or "
    "other. We provide the definitions for these below.\n"
    "\n"
    "Definitions:\n"
    "Role: defines what part the character plays in the story, narrator, major/minor "
    "character.\n"
    "Relationship: connections the character has with others, such as friendships or family "
    "ties.\n"
    "Personality: character’s behavior, traits, and attributes.\n"
    "Event: actions and decisions the character is involved in throughout the story.\n"
    "Other: any other fact that doesn’t belong to the above categories.\n"
    "\n"
    "Output format:\n"
    "{output_format}\n"
    "\n"
    "Generate an explanation, 1-2 sentences that fully justify your answer, do not simply "
    "repeat the answer. Type of qa has to be one of Role, Relationship, Personality, Event or "
    "Other. The answer should be short 1-4 words. Generate QA-pairs only related to character: "
    "{character}. Generate QA-pairs only for information mentioned in the provided context. Do "
    "not include unanswered questions.\n"
    "\n"
    "The questions has to mention the name of the character: {character}. Do not generate "
    "repetitive QA-pairs with same answer. If the character is not mentioned, simply return "
    "None.";

constexpr const char* kMerge =
    "Intermediate descriptions:\n"
    "{context}\n"
    "\n"
    "The intermediate descriptions above each describe character {character} from book {book} "
    "based on a different part of the book. Merge these intermediate descriptions into one "
    "description.\n"
    "Return your output as a single paragraph (close to {length} words) including the "
    "important information.";

constexpr const char* kIncremental =
    "Context: {context}\n"
    "\n"
    "Current description: {previous}\n"
    "\n"
    "Update the current description of character {character} from book {book} using the new "
    "context above. Keep what is still correct and add the new information.\n"
    "Return your output as a single paragraph (close to {length} words) including the "
    "important information.";

constexpr const char* kReferenceQa =
    "Description:\n"
    "{description}\n"
    "\n"
    "Write question-answer pairs that cover every fact the description above states about "
    "character {character}. Each answer should be short, 1-4 words.\n"
    "\n"
    "Output format:\n"
    "Q1: <question> A1: <answer>\n"
    "Q2: <question> A2: <answer>\n"
    "...\n"
    "\n"
    "If the description states no facts about the character, return None.";

constexpr const char* kVerify =
    "Evidence:\n"
    "{evidence}\n"
    "\n"
    "Question: {question}\n"
    "Answer: {answer}\n"
    "\n"
    "Based only on the evidence, is the answer correct for the question? Reply with yes or no "
    "as the first word.";

constexpr const char* kFactExtraction =
    "Break the following text into independent atomic facts. List one fact per line, without "
    "numbering or commentary.\n"
    "\n"
    "Text:\n"
    "{text}";

constexpr const char* kEntailment =
    "Document:\n"
    "{document}\n"
    "\n"
    "Claim:\n"
    "{claim}\n"
    "\n"
    "Reply with a single number between 0 and 1: the probability that the document supports "
    "the claim.";

constexpr const char* kQaAnswer =
    "Context:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Answer with a short span taken from the context. If the context does not answer the "
    "question, reply unanswerable.";

std::optional<std::string> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  auto s = ss.str();
  // Editors like to add a final newline; templates should not carry it.
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

PromptTemplates PromptTemplates::defaults() {
  PromptTemplates t;
  t.description = kDescription;
  t.description_no_context = kDescriptionNoContext;
  t.qa_generation = kQaGeneration;
  t.merge = kMerge;
  t.incremental_update = kIncremental;
  t.reference_qa = kReferenceQa;
  t.verify = kVerify;
  t.fact_extraction = kFactExtraction;
  t.entailment = kEntailment;
  t.qa_answer = kQaAnswer;
  return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "prompt directory not found: " + dir.string());
  }
  auto t = defaults();
  const std::pair<const char*, std::string*> slots[] = {
      {"description", &t.description},
      {"description_no_context", &t.description_no_context},
      {"qa_generation", &t.qa_generation},
      {"merge", &t.merge},
      {"incremental_update", &t.incremental_update},
      {"reference_qa", &t.reference_qa},
      {"verify", &t.verify},
      {"fact_extraction", &t.fact_extraction},
      {"entailment", &t.entailment},
      {"qa_answer", &t.qa_answer},
  };
  for (const auto& [name, slot] : slots) {
    if (auto content = read_file(dir / (std::string(name) + ".txt"))) *slot = *content;
  }
  return t;
}

std::string output_format_lines(const TraceFormat& format) {
  std::string out;
  for (int n = 1; n <= 2; ++n) {
    auto k = std::to_string(n);
    out += "Q" + k + ": <question>";
    if (format.include_explanation) out += " E" + k + ": <explanation>";
    if (format.include_answer) out += " A" + k + ": <answer>";
    if (format.include_type) out += " T" + k + ": <type>";
    out += "\n";
  }
  out += "...";
  return out;
}

std::string render_description_prompt(const PromptTemplates& t, std::string_view context,
                                      std::string_view character, std::string_view book,
                                      int target_words) {
  const auto& tmpl = context.empty() ? t.description_no_context : t.description;
  return text::substitute(tmpl, {{"context", std::string(context)},
                                 {"character", std::string(character)},
                                 {"book", std::string(book)},
                                 {"length", std::to_string(target_words)}});
}

std::string render_qa_prompt(const PromptTemplates& t, std::string_view context,
                             std::string_view character, std::string_view book,
                             const TraceFormat& format) {
  return text::substitute(t.qa_generation, {{"context", std::string(context)},
                                            {"character", std::string(character)},
                                            {"book", std::string(book)},
                                            {"output_format", output_format_lines(format)}});
}

}  // namespace qaguide
