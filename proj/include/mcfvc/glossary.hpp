#pragma once

// Append-only vocabulary. Indices never move once assigned, which is what
// keeps embedding and output rows aligned across sequential tasks.

#include <string>
#include <unordered_map>
#include <vector>

#include "mcfvc/errors.hpp"

namespace mcfvc {

class Glossary {
  public:
    static constexpr int kBos = 0;
    static constexpr int kEos = 1;
    static constexpr int kPad = 2;
    static constexpr int kUnk = 3;

    Glossary() {
        for (const char* w : {"<bos>", "<eos>", "<pad>", "<unk>"}) add(w);
    }

    int size() const { return static_cast<int>(words_.size()); }

    bool contains(const std::string& w) const { return index_.count(w) > 0; }

    int index(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? kUnk : it->second;
    }

    const std::string& word(int idx) const {
        if (idx < 0 || idx >= size())
            throw ContractError("glossary index " + std::to_string(idx) + " out of range (size " +
                                std::to_string(size()) + ")");
        return words_[static_cast<size_t>(idx)];
    }

    // Appends if unseen; existing tokens keep their index.
    int add(const std::string& w) {
        auto it = index_.find(w);
        if (it != index_.end()) return it->second;
        int idx = size();
        words_.push_back(w);
        index_.emplace(w, idx);
        return idx;
    }

    // First-occurrence-order extension from token streams.
    void extend(const std::vector<std::vector<std::string>>& token_streams) {
        for (const auto& stream : token_streams)
            for (const auto& tok : stream) add(tok);
    }

    std::vector<int> encode(const std::vector<std::string>& tokens) const {
        std::vector<int> out;
        out.reserve(tokens.size());
        for (const auto& t : tokens) out.push_back(index(t));
        return out;
    }

    const std::vector<std::string>& words() const { return words_; }

    bool operator==(const Glossary& other) const { return words_ == other.words_; }

  private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
};

}  // namespace mcfvc
