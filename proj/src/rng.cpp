#include "pearle/rng.hpp"

#include <boost/random/normal_distribution.hpp>

namespace pearle {

double Rng::normal() noexcept {
  // Stateless ziggurat; consumes a variable number of 64-bit outputs.
  boost::random::normal_distribution<double> dist;
  return dist(*this);
}

}  // namespace pearle
