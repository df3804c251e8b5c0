#include "navprune/vocabulary.hpp"

namespace navprune {

// Version 1. Bump kFunctionWordListVersion when editing. Direction-bearing
// words (up, down, left, right, into, through, past, ...) are deliberately absent.
const std::set<std::string>& function_words() {
    static const std::set<std::string> words = {
        // articles and determiners
        "a", "an", "the", "this", "that", "these", "those", "some", "any", "each", "every",
        "another", "other", "such",
        // conjunctions
        "and", "or", "but", "nor", "so", "yet", "if", "because", "while", "although", "as",
        "than", "then", "once", "when", "whether",
        // prepositions without a direction
        "of", "to", "at", "on", "in", "by", "for", "with", "from", "about", "onto", "upon",
        "within", "without", "via", "per",
        // pronouns
        "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "my",
        "your", "his", "its", "our", "their", "yours", "mine", "itself", "yourself", "there",
        "here", "which", "who", "whom", "whose", "what",
        // auxiliaries and copulas
        "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "have",
        "has", "had", "will", "would", "shall", "should", "can", "could", "may", "might",
        "must",
        // fillers and number words
        "just", "very", "please", "also", "now", "one", "two", "three", "four", "five", "six",
        "seven", "eight", "nine", "ten", "all", "both", "few"};
    return words;
}

}  // namespace navprune
