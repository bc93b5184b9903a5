#include "astprep/language.hpp"

#include <array>
#include <utility>

namespace astprep {

namespace {

constexpr std::array<std::pair<Language, std::string_view>, 8> kNames{{
    {Language::Python, "python"},
    {Language::Java, "java"},
    {Language::C, "c"},
    {Language::Cpp, "cpp"},
    {Language::CSharp, "csharp"},
    {Language::Markdown, "markdown"},
    {Language::ReStructuredText, "rst"},
    {Language::Toy, "toy"},
}};

constexpr std::array<std::pair<std::string_view, Language>, 13> kExtensions{{
    {".py", Language::Python},
    {".java", Language::Java},
    {".c", Language::C},
    {".h", Language::C},
    {".cpp", Language::Cpp},
    {".hpp", Language::Cpp},
    {".cc", Language::Cpp},
    {".cxx", Language::Cpp},
    {".hh", Language::Cpp},
    {".cs", Language::CSharp},
    {".md", Language::Markdown},
    {".rst", Language::ReStructuredText},
    {".toy", Language::Toy},
}};

}  // namespace

bool is_code(Language lang) noexcept {
    return lang != Language::Markdown && lang != Language::ReStructuredText;
}

std::string_view language_name(Language lang) noexcept {
    for (auto [l, name] : kNames)
        if (l == lang) return name;
    return "unknown";
}

std::optional<Language> language_from_name(std::string_view name) noexcept {
    for (auto [l, n] : kNames)
        if (n == name) return l;
    return std::nullopt;
}

std::optional<Language> language_for_extension(std::string_view ext) noexcept {
    for (auto [e, l] : kExtensions)
        if (e == ext) return l;
    return std::nullopt;
}

}  // namespace astprep
