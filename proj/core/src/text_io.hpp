#pragma once

// Line-oriented helpers shared by the ASCII file formats.

#include <charconv>
#include <cstdio>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "e2n/errors.hpp"

namespace e2n::io
{

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double x)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

class LineReader
{
public:
  explicit LineReader(std::istream &in) : in_(in) {}

  int line() const { return line_; }

  /// Tokens of the next non-blank line; throws at end of input.
  std::vector<std::string> tokens()
  {
    std::string text;
    while (std::getline(in_, text))
    {
      ++line_;
      std::vector<std::string> out;
      std::size_t i = 0;
      while (i < text.size())
      {
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r'))
        {
          ++i;
        }
        std::size_t j = i;
        while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\r')
        {
          ++j;
        }
        if (j > i)
        {
          out.push_back(text.substr(i, j - i));
        }
        i = j;
      }
      if (!out.empty())
      {
        return out;
      }
    }
    throw ParseError("unexpected end of file", line_ + 1);
  }

  void expect_header(std::string_view tag, int version)
  {
    const auto t = tokens();
    if (t.size() != 2 || t[0] != tag || to_int(t[1]) != version)
    {
      throw ParseError("expected header '" + std::string(tag) + " " + std::to_string(version) +
                         "'",
                       line_);
    }
  }

  int read_count()
  {
    const auto t = tokens();
    if (t.size() != 1)
    {
      throw ParseError("expected a single count", line_);
    }
    const int n = to_int(t[0]);
    if (n < 0)
    {
      throw ParseError("negative count", line_);
    }
    return n;
  }

  std::vector<double> read_doubles(std::size_t n)
  {
    const auto t = tokens();
    if (t.size() != n)
    {
      throw ParseError("expected " + std::to_string(n) + " values", line_);
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
    {
      out[i] = to_double(t[i]);
    }
    return out;
  }

  std::vector<int> read_ints(std::size_t n)
  {
    const auto t = tokens();
    if (t.size() != n)
    {
      throw ParseError("expected " + std::to_string(n) + " integers", line_);
    }
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i)
    {
      out[i] = to_int(t[i]);
    }
    return out;
  }

  int to_int(const std::string &s) const
  {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    {
      throw ParseError("malformed integer '" + s + "'", line_);
    }
    return v;
  }

  double to_double(const std::string &s) const
  {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    {
      throw ParseError("malformed number '" + s + "'", line_);
    }
    return v;
  }

private:
  std::istream &in_;
  int line_ = 0;
};

}  // namespace e2n::io
