#pragma once

#include <string_view>

// Data files under data/ compiled into the library.
namespace planlens::resources {

std::string_view stopwords_en();
std::string_view lemmas_en();
std::string_view lexicon_en();

}  // namespace planlens::resources
