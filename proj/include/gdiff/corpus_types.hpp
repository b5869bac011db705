#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gdiff/error.hpp"
#include "gdiff/graph.hpp"

namespace gdiff {

enum class Split { Train, Val, Test };

inline std::string to_string(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "train";
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

struct CorpusEntry {
    Graph graph;
    std::string domain;
    Split split = Split::Train;
    std::optional<std::string> prompt;
    std::string name;
};

/// Domain-labelled graphs with train/val/test assignment.
struct Corpus {
    CategorySpace space;
    std::vector<CorpusEntry> entries;

    /// Distinct domains in first-appearance order.
    std::vector<std::string> domains() const {
        std::vector<std::string> out;
        for (const auto& e : entries) {
            bool seen = false;
            for (const auto& d : out) seen = seen || d == e.domain;
            if (!seen) out.push_back(e.domain);
        }
        return out;
    }

    std::vector<const CorpusEntry*> select(std::optional<Split> split, const std::string* domain = nullptr) const {
        std::vector<const CorpusEntry*> out;
        for (const auto& e : entries)
            if ((!split || e.split == *split) && (!domain || e.domain == *domain)) out.push_back(&e);
        return out;
    }
};

}  // namespace gdiff
