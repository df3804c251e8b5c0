#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "navprune/tokens.hpp"

namespace navprune {

// Shared normalization for lexicon, vocabulary and VPP lookups: sentence
// delimiters verbatim, all-punctuation strings verbatim, otherwise lowercase
// with leading/trailing punctuation stripped.
std::string normalize_word(std::string_view word);

bool is_punctuation(std::string_view word);
bool is_delimiter(std::string_view word);
bool is_numeral(std::string_view word);

// Splits on whitespace and peels leading/trailing punctuation into separate
// tokens. Returned tokens are normalized.
std::vector<std::string> tokenize(std::string_view text);

struct LexiconEntry {
    std::string word;
    std::size_t frequency = 0;
    bool operator==(const LexiconEntry&) const = default;
};

// Sorted by frequency descending, then word ascending.
using Lexicon = std::vector<LexiconEntry>;

Lexicon extract_lexicon(const std::vector<std::string>& corpus);

enum class Label { relevant, irrelevant };
enum class LabelSource { service, cache, fallback };

std::string to_string(Label label);
std::string to_string(LabelSource source);
Label parse_label(std::string_view text);
LabelSource parse_source(std::string_view text);

struct ClassificationRecord {
    std::string word;
    Label label = Label::relevant;
    std::string explanation;
    LabelSource source = LabelSource::fallback;
};

// Version of the built-in function-word list below.
inline constexpr int kFunctionWordListVersion = 1;
const std::set<std::string>& function_words();

Label fallback_classify(std::string_view word);

// Text-completion service.
class CompletionClient {
public:
    virtual ~CompletionClient() = default;
    virtual std::string complete(const std::string& prompt) = 0;
    virtual std::string model() const = 0;
};

// Prompt with the word list interpolated.
std::string build_prompt(std::span<const std::string> words);

struct ParsedLabel {
    std::string word;
    Label label;
    std::string explanation;
};

// Lines not shaped "{word} : relevant|irrelevant {explanation}" are skipped.
std::vector<ParsedLabel> parse_response(std::string_view response);

// word -> (label, source) with a builder id in the header. Thread-safe.
class ClassificationCache {
public:
    struct Entry {
        Label label;
        LabelSource source;
    };

    ClassificationCache() = default;
    ClassificationCache(const ClassificationCache& other);
    ClassificationCache& operator=(const ClassificationCache& other);

    bool lookup(const std::string& word, Entry& out) const;
    void store(const std::string& word, Entry entry);
    std::size_t size() const;

    void set_builder(std::string builder);
    std::string builder() const;

    std::string serialize() const;
    static ClassificationCache parse(std::string_view text);
    static ClassificationCache load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Entry> entries_;
    std::string builder_ = "fallback";
};

struct ClassifyOptions {
    std::size_t batch_size = 40;
    std::size_t max_attempts = 3;
    std::size_t backoff_ms = 250;  // doubled after every failed attempt
    std::size_t concurrency = 4;
    bool allow_fallback = true;
};

// Cached words are answered from the cache; the rest go to the client in
// batches (client may be null). Every result is written back to the cache.
std::vector<ClassificationRecord> classify_words(const Lexicon& lexicon, CompletionClient* client,
                                                 ClassificationCache& cache,
                                                 const ClassifyOptions& options = {});

struct VocabularyMeta {
    std::string source;
    std::string builder = "fallback";
    std::string timestamp = "1970-01-01T00:00:00Z";
};

class Vocabulary {
public:
    static constexpr const char* kFormatHeader = "# navprune-vocabulary v1";

    Vocabulary() = default;
    Vocabulary(std::set<std::string> words, VocabularyMeta meta);

    // Normalizes `word` before the lookup.
    bool contains(std::string_view word) const;
    const std::set<std::string>& words() const { return words_; }
    const VocabularyMeta& meta() const { return meta_; }

    std::string serialize() const;
    static Vocabulary parse(std::string_view text);
    static Vocabulary load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

private:
    std::set<std::string> words_;
    VocabularyMeta meta_;
};

Vocabulary build_vocabulary(const std::vector<ClassificationRecord>& records,
                            VocabularyMeta meta = {});

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace navprune
