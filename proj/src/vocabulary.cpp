#include "navprune/vocabulary.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <fstream>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace navprune {

namespace {

bool punct_char(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::string line;
    std::istringstream in{std::string(text)};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

}  // namespace

bool is_delimiter(std::string_view word) { return word == kStartToken || word == kEndToken; }

bool is_punctuation(std::string_view word) {
    return !word.empty() && std::all_of(word.begin(), word.end(), punct_char);
}

bool is_numeral(std::string_view word) {
    if (word.empty()) return false;
    bool digit = false;
    for (char c : word) {
        if (std::isdigit(static_cast<unsigned char>(c))) digit = true;
        else if (c != '.' && c != ',') return false;
    }
    return digit;
}

std::string normalize_word(std::string_view word) {
    if (is_delimiter(word) || is_punctuation(word)) return std::string(word);
    std::size_t b = 0, e = word.size();
    while (b < e && punct_char(word[b])) ++b;
    while (e > b && punct_char(word[e - 1])) --e;
    return lower(word.substr(b, e - b));
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string chunk;
    while (in >> chunk) {
        if (is_delimiter(chunk) || is_punctuation(chunk)) {
            if (is_delimiter(chunk)) out.push_back(chunk);
            else
                for (char c : chunk) out.emplace_back(1, c);
            continue;
        }
        std::size_t b = 0, e = chunk.size();
        while (b < e && punct_char(chunk[b])) ++b;
        while (e > b && punct_char(chunk[e - 1])) --e;
        for (std::size_t i = 0; i < b; ++i) out.emplace_back(1, chunk[i]);
        out.push_back(lower(std::string_view(chunk).substr(b, e - b)));
        for (std::size_t i = e; i < chunk.size(); ++i) out.emplace_back(1, chunk[i]);
    }
    return out;
}

Lexicon extract_lexicon(const std::vector<std::string>& corpus) {
    std::map<std::string, std::size_t> counts;
    for (const auto& line : corpus)
        for (auto& w : tokenize(line)) ++counts[w];
    if (counts.empty()) throw std::invalid_argument("empty corpus");
    Lexicon lex;
    for (auto& [w, n] : counts) lex.push_back({w, n});
    std::stable_sort(lex.begin(), lex.end(), [](const LexiconEntry& a, const LexiconEntry& b) {
        return a.frequency > b.frequency;
    });
    return lex;
}

std::string to_string(Label label) { return label == Label::relevant ? "relevant" : "irrelevant"; }

std::string to_string(LabelSource source) {
    switch (source) {
        case LabelSource::service: return "service";
        case LabelSource::cache: return "cache";
        case LabelSource::fallback: return "fallback";
    }
    return "?";
}

Label parse_label(std::string_view text) {
    if (text == "relevant") return Label::relevant;
    if (text == "irrelevant") return Label::irrelevant;
    throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

LabelSource parse_source(std::string_view text) {
    for (auto s : {LabelSource::service, LabelSource::cache, LabelSource::fallback})
        if (to_string(s) == text) return s;
    throw std::invalid_argument("unknown label source '" + std::string(text) + "'");
}

Label fallback_classify(std::string_view word) {
    const std::string w = normalize_word(word);
    if (is_punctuation(w) || is_delimiter(w) || is_numeral(w) || function_words().count(w))
        return Label::irrelevant;
    return Label::relevant;
}

std::string build_prompt(std::span<const std::string> words) {
    std::string list;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) list += ", ";
        list += "\"" + words[i] + "\"";
    }
    return "Given the following set of words: " + list +
           ", can you point out which of them are irrelevant to the following types of "
           "information: 1. A direction to go; 2. Describing the environment; 3. Object(s) in "
           "the indoor/outdoor environments. Please don't change the word in the quotation mark "
           "and explain why. Please answer in the following: format: "
           "\"{word} : relevant/irrelevant {explanation}\"";
}

std::vector<ParsedLabel> parse_response(std::string_view response) {
    static const std::regex line_re(
        R"re(^\s*["'`]*([^"'`:]+?)["'`]*\s*:\s*(relevant|irrelevant)\b\s*(.*)$)re",
        std::regex::icase);
    std::vector<ParsedLabel> out;
    for (const auto& line : split_lines(response)) {
        std::smatch m;
        if (!std::regex_match(line, m, line_re)) continue;
        out.push_back({normalize_word(trim(m[1].str())), parse_label(lower(m[2].str())),
                       trim(m[3].str())});
    }
    return out;
}

ClassificationCache::ClassificationCache(const ClassificationCache& other) {
    std::lock_guard lock(other.mutex_);
    entries_ = other.entries_;
    builder_ = other.builder_;
}

ClassificationCache& ClassificationCache::operator=(const ClassificationCache& other) {
    if (this == &other) return *this;
    std::scoped_lock lock(mutex_, other.mutex_);
    entries_ = other.entries_;
    builder_ = other.builder_;
    return *this;
}

bool ClassificationCache::lookup(const std::string& word, Entry& out) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(word);
    if (it == entries_.end()) return false;
    out = it->second;
    return true;
}

void ClassificationCache::store(const std::string& word, Entry entry) {
    std::lock_guard lock(mutex_);
    entries_[word] = entry;
}

std::size_t ClassificationCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

void ClassificationCache::set_builder(std::string builder) {
    std::lock_guard lock(mutex_);
    builder_ = std::move(builder);
}

std::string ClassificationCache::builder() const {
    std::lock_guard lock(mutex_);
    return builder_;
}

std::string ClassificationCache::serialize() const {
    std::lock_guard lock(mutex_);
    std::string out = "# navprune-cache v1\n# builder: " + builder_ + "\n";
    for (const auto& [w, e] : entries_)
        out += w + "\t" + to_string(e.label) + "\t" + to_string(e.source) + "\n";
    return out;
}

ClassificationCache ClassificationCache::parse(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != "# navprune-cache v1")
        throw std::runtime_error("cache version header mismatch");
    ClassificationCache cache;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (line.rfind("# builder: ", 0) == 0) cache.builder_ = line.substr(11);
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
        if (t1 == std::string::npos || t2 == std::string::npos)
            throw std::runtime_error("malformed cache line " + std::to_string(i + 1));
        cache.entries_[line.substr(0, t1)] = {parse_label(line.substr(t1 + 1, t2 - t1 - 1)),
                                              parse_source(line.substr(t2 + 1))};
    }
    return cache;
}

ClassificationCache ClassificationCache::load(const std::filesystem::path& path) {
    return parse(read_text_file(path));
}

void ClassificationCache::save(const std::filesystem::path& path) const {
    write_text_file(path, serialize());
}

namespace {

// Sends one batch with retries. Returns the parsed labels, or nothing when
// every attempt failed.
std::vector<ParsedLabel> query_batch(CompletionClient& client, const std::vector<std::string>& words,
                                     const ClassifyOptions& options) {
    const std::string prompt = build_prompt(words);
    std::size_t delay = options.backoff_ms;
    for (std::size_t attempt = 0; attempt < options.max_attempts; ++attempt) {
        try {
            return parse_response(client.complete(prompt));
        } catch (const std::exception&) {
            if (attempt + 1 == options.max_attempts) break;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
            delay *= 2;
        }
    }
    return {};
}

}  // namespace

std::vector<ClassificationRecord> classify_words(const Lexicon& lexicon, CompletionClient* client,
                                                 ClassificationCache& cache,
                                                 const ClassifyOptions& options) {
    std::vector<ClassificationRecord> records(lexicon.size());
    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < lexicon.size(); ++i) {
        const std::string& w = lexicon[i].word;
        records[i].word = w;
        ClassificationCache::Entry e;
        // Fallback labels in the cache are retried when a service is available.
        if (cache.lookup(w, e) && !(client && e.source == LabelSource::fallback)) {
            records[i].label = e.label;
            records[i].source = LabelSource::cache;
        } else {
            pending.push_back(i);
        }
    }

    if (client && !pending.empty()) {
        const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
        std::vector<std::vector<std::size_t>> batches;
        for (std::size_t b = 0; b < pending.size(); b += batch)
            batches.emplace_back(pending.begin() + static_cast<std::ptrdiff_t>(b),
                                 pending.begin() + static_cast<std::ptrdiff_t>(std::min(b + batch, pending.size())));
        std::vector<std::vector<ParsedLabel>> answers(batches.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t b = next++; b < batches.size(); b = next++) {
                std::vector<std::string> words;
                for (std::size_t i : batches[b]) words.push_back(records[i].word);
                answers[b] = query_batch(*client, words, options);
            }
        };
        std::vector<std::thread> pool;
        const std::size_t n = std::min(std::max<std::size_t>(1, options.concurrency), batches.size());
        for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();

        for (std::size_t b = 0; b < batches.size(); ++b) {
            for (std::size_t i : batches[b]) {
                for (const auto& a : answers[b]) {
                    if (a.word != records[i].word) continue;
                    records[i].label = a.label;
                    records[i].explanation = a.explanation;
                    records[i].source = LabelSource::service;
                    break;
                }
            }
        }
    }

    std::vector<std::string> unresolved;
    for (std::size_t i : pending) {
        auto& r = records[i];
        if (r.source == LabelSource::service) {
            cache.store(r.word, {r.label, LabelSource::service});
            continue;
        }
        if (!options.allow_fallback) {
            unresolved.push_back(r.word);
            continue;
        }
        r.label = fallback_classify(r.word);
        r.source = LabelSource::fallback;
        r.explanation = "built-in function-word rule";
        cache.store(r.word, {r.label, LabelSource::fallback});
    }
    if (!unresolved.empty()) {
        std::string msg = "unresolved words:";
        for (const auto& w : unresolved) msg += " " + w;
        throw std::runtime_error(msg);
    }
    if (client) cache.set_builder(client->model());
    return records;
}

Vocabulary::Vocabulary(std::set<std::string> words, VocabularyMeta meta)
    : meta_(std::move(meta)) {
    for (const auto& w : words) {
        std::string n = normalize_word(w);
        if (!n.empty()) words_.insert(std::move(n));
    }
}

bool Vocabulary::contains(std::string_view word) const { return words_.count(normalize_word(word)) != 0; }

std::string Vocabulary::serialize() const {
    std::string out = std::string(kFormatHeader) + "\n";
    out += "# source: " + meta_.source + "\n";
    out += "# builder: " + meta_.builder + "\n";
    out += "# timestamp: " + meta_.timestamp + "\n";
    for (const auto& w : words_) out += w + "\n";
    return out;
}

Vocabulary Vocabulary::parse(std::string_view text) {
    const auto lines = split_lines(text);
    if (lines.empty() || lines[0] != kFormatHeader)
        throw std::runtime_error("vocabulary version header mismatch");
    VocabularyMeta meta{"", "", ""};
    std::set<std::string> words;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto field = [&](const char* key, std::string& dst) {
                const std::string prefix = std::string("# ") + key + ": ";
                if (line.rfind(prefix, 0) == 0) dst = line.substr(prefix.size());
            };
            field("source", meta.source);
            field("builder", meta.builder);
            field("timestamp", meta.timestamp);
            continue;
        }
        words.insert(line);
    }
    return Vocabulary(std::move(words), std::move(meta));
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) { return parse(read_text_file(path)); }

void Vocabulary::save(const std::filesystem::path& path) const { write_text_file(path, serialize()); }

Vocabulary build_vocabulary(const std::vector<ClassificationRecord>& records, VocabularyMeta meta) {
    std::set<std::string> words;
    for (const auto& r : records)
        if (r.label == Label::irrelevant) words.insert(r.word);
    return Vocabulary(std::move(words), std::move(meta));
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace navprune
