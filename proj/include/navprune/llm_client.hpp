#pragma once

#include <memory>
#include <string>

#include "navprune/vocabulary.hpp"

namespace navprune {

// Plain-HTTP text-completion client. POSTs {"model", "prompt", "temperature": 0}
// as JSON and reads choices[0].text (or choices[0].message.content).
class HttpCompletionClient : public CompletionClient {
public:
    // url: scheme://host[:port]/path
    HttpCompletionClient(std::string url, std::string model, std::string key);

    std::string complete(const std::string& prompt) override;
    std::string model() const override { return model_; }

    // Reads NAVPRUNE_LLM_URL, NAVPRUNE_LLM_MODEL and NAVPRUNE_LLM_KEY. Returns
    // null when the URL is unset.
    static std::unique_ptr<HttpCompletionClient> from_env();

private:
    std::string host_;
    std::string path_;
    std::string model_;
    std::string key_;
};

}  // namespace navprune
