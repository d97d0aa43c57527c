#include "cwms/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "cwms/error.hpp"

namespace cwms {
namespace {

// Byte length of the UTF-8 sequence introduced by `lead`, 1 for stray bytes.
std::size_t sequence_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto lead = static_cast<unsigned char>(s[i]);
    std::size_t n = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      ++i;
      continue;
    } else if ((lead >> 5) == 0x6) {
      n = 2;
      cp = lead & 0x1F;
    } else if ((lead >> 4) == 0xE) {
      n = 3;
      cp = lead & 0x0F;
    } else if ((lead >> 3) == 0x1E) {
      n = 4;
      cp = lead & 0x07;
    } else {
      return false;
    }
    if (i + n > s.size()) return false;
    for (std::size_t k = 1; k < n; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c >> 6) != 0x2) return false;
      cp = (cp << 6) | (c & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((n == 2 && cp < 0x80) || (n == 3 && cp < 0x800) || (n == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += n;
  }
  return true;
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' ||
         c == 0x85 || c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) ||
         c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

}  // namespace

std::string normalize_text(std::string_view utf8) {
  if (!is_valid_utf8(utf8)) throw Error(ErrorKind::Format, "text is not valid UTF-8");

  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(ErrorKind::Io, "ICU NFC normalizer unavailable");

  const icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  const icu::UnicodeString composed = nfc->normalize(src, status);
  if (U_FAILURE(status)) throw Error(ErrorKind::Format, "NFC normalization failed");

  std::string out;
  out.reserve(utf8.size());
  bool pending_space = false;
  for (int32_t i = 0; i < composed.length();) {
    const UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (is_space(static_cast<char32_t>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    if (c >= 'A' && c <= 'Z') {
      out.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      icu::UnicodeString one(c);
      one.toUTF8String(out);
    }
  }
  return out;
}

std::vector<std::string_view> split_code_points(std::string_view utf8) {
  std::vector<std::string_view> out;
  out.reserve(utf8.size());
  std::size_t i = 0;
  while (i < utf8.size()) {
    std::size_t n = sequence_length(static_cast<unsigned char>(utf8[i]));
    if (i + n > utf8.size()) n = utf8.size() - i;
    out.push_back(utf8.substr(i, n));
    i += n;
  }
  return out;
}

std::size_t char_length(std::string_view utf8) {
  std::size_t count = 0;
  for (unsigned char c : utf8) {
    if ((c & 0xC0) != 0x80) ++count;
  }
  return count;
}

std::string_view prefix_chars(std::string_view utf8, std::size_t n) {
  std::size_t i = 0;
  std::size_t seen = 0;
  while (i < utf8.size() && seen < n) {
    i += sequence_length(static_cast<unsigned char>(utf8[i]));
    ++seen;
  }
  return utf8.substr(0, std::min(i, utf8.size()));
}

}  // namespace cwms
