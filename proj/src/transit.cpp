#include "geoscene/transit.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <sstream>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <arpa/inet.h>
#include <sys/socket.h>
#include <unistd.h>

#include "geoscene/error.hpp"

namespace geoscene::transit {

// -- routes ----------------------------------------------------------------------

Route::Route(std::string id, std::vector<Point2D> points, std::string destination)
    : id_(std::move(id)), destination_(std::move(destination)), points_(std::move(points)) {
  if (points_.size() < 2) throw Error(ErrorCode::InvalidRoute, "route " + id_ + ": fewer than 2 points");
  cum_.assign(1, 0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double len = (points_[i] - points_[i - 1]).norm();
    if (!(len > 0.0) || !std::isfinite(len))
      throw Error(ErrorCode::InvalidRoute, "route " + id_ + ": cumulative length not strictly increasing");
    cum_.push_back(cum_.back() + len);
  }
}

PolylinePoint Route::at(double arc) const {
  arc = std::clamp(arc, 0.0, length());
  auto it = std::upper_bound(cum_.begin(), cum_.end(), arc);
  std::size_t seg = it == cum_.begin() ? 0 : static_cast<std::size_t>(it - cum_.begin()) - 1;
  seg = std::min(seg, points_.size() - 2);
  const Point2D a = points_[seg], b = points_[seg + 1];
  const double t = (arc - cum_[seg]) / (cum_[seg + 1] - cum_[seg]);
  PolylinePoint out;
  out.position = a + t * (b - a);
  double h = std::atan2(b.y() - a.y(), b.x() - a.x()) * 180.0 / M_PI;
  if (h < 0) h += 360.0;
  out.heading = h >= 360.0 ? 0.0 : h;
  out.segment = seg;
  return out;
}

namespace {

struct Candidate {
  double arc;
  double dist;
};

std::vector<Candidate> closest_per_segment(const Route& r, const Point2D& p) {
  const auto& pts = r.points();
  const auto& cum = r.cumulative();
  std::vector<Candidate> out;
  out.reserve(pts.size() - 1);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Point2D ab = pts[i + 1] - pts[i];
    const double t = std::clamp((p - pts[i]).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const Point2D q = pts[i] + t * ab;
    out.push_back({cum[i] + t * (cum[i + 1] - cum[i]), (p - q).norm()});
  }
  return out;
}

}  // namespace

double Route::project(const Point2D& p, double* distance) const {
  double best_arc = 0.0, best = std::numeric_limits<double>::infinity();
  for (const auto& c : closest_per_segment(*this, p)) {
    if (c.dist < best) {
      best = c.dist;
      best_arc = c.arc;
    }
  }
  if (distance) *distance = best;
  return best_arc;
}

void Route::add_stop(std::string name, double arc) {
  if (!(arc >= 0.0 && arc <= length()))
    throw Error(ErrorCode::InvalidRoute, "route " + id_ + ": stop outside the route");
  stops_.push_back({std::move(name), arc});
  std::stable_sort(stops_.begin(), stops_.end(), [](const Stop& a, const Stop& b) { return a.arc < b.arc; });
}

const Route& TransitNetwork::route(const std::string& id) const {
  auto it = routes.find(id);
  if (it == routes.end()) throw Error(ErrorCode::RouteUnknown, "unknown route " + id);
  return it->second;
}

// -- network document -----------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
}

}  // namespace

TransitNetwork load_network(std::string_view document) {
  TransitNetwork net;
  bool have_origin = false;
  struct Pending {
    std::string id, destination;
    std::vector<Point2D> points;
    std::vector<std::pair<std::string, Point2D>> stops;
    int line = 0;
  };
  std::optional<Pending> cur;

  std::istringstream in{std::string(document)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    auto number = [&](double& v) {
      if (!(ls >> v) || !std::isfinite(v)) parse_fail(lineno, "expected a number in '" + line + "'");
    };
    auto rest = [&] {
      std::string r;
      std::getline(ls, r);
      return trim(r);
    };
    auto geo = [&](double lat, double lon) {
      if (!have_origin) parse_fail(lineno, "geographic coordinates before 'origin'");
      return geom::project_unchecked({lat, lon}, net.origin);
    };

    if (kw == "origin") {
      number(net.origin.lat);
      number(net.origin.lon);
      have_origin = true;
    } else if (kw == "agency") {
      net.agencies.push_back(rest());
    } else if (kw == "route") {
      if (cur) parse_fail(lineno, "route inside route " + cur->id);
      cur.emplace();
      if (!(ls >> cur->id)) parse_fail(lineno, "route without id");
      cur->destination = rest();
      cur->line = lineno;
      if (net.routes.count(cur->id)) parse_fail(lineno, "duplicate route " + cur->id);
    } else if (kw == "point" || kw == "xy" || kw == "stop" || kw == "stop_xy") {
      if (!cur) parse_fail(lineno, "'" + kw + "' outside a route");
      double a = 0, b = 0;
      number(a);
      number(b);
      const Point2D p = (kw == "xy" || kw == "stop_xy") ? Point2D(a, b) : geo(a, b);
      if (kw == "point" || kw == "xy") {
        cur->points.push_back(p);
      } else {
        std::string name = rest();
        if (name.empty()) parse_fail(lineno, "stop without name");
        cur->stops.emplace_back(std::move(name), p);
      }
    } else if (kw == "end") {
      if (!cur) parse_fail(lineno, "'end' without route");
      Route r(cur->id, std::move(cur->points), cur->destination);
      for (auto& [name, p] : cur->stops) r.add_stop(std::move(name), r.project(p));
      net.routes.emplace(cur->id, std::move(r));
      cur.reset();
    } else {
      parse_fail(lineno, "unknown record '" + kw + "'");
    }
  }
  if (cur) parse_fail(cur->line, "route " + cur->id + " not closed with 'end'");
  if (net.routes.empty()) throw Error(ErrorCode::ParseError, "network document has no routes");
  return net;
}

// -- matching and motion ----------------------------------------------------------------

double map_match(const Route& route, const Point2D& p, std::optional<double> prev_arc, double d_max) {
  const auto cands = closest_per_segment(route, p);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& c : cands) best = std::min(best, c.dist);
  if (best > d_max) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "fix %.1f m from route %s", best, route.id().c_str());
    throw Error(ErrorCode::FixTooFar, buf);
  }
  constexpr double kTie = 1e-6;
  std::optional<double> ahead, behind;
  for (const auto& c : cands) {
    if (c.dist > best + kTie) continue;
    if (!prev_arc || c.arc >= *prev_arc) {
      if (!ahead || c.arc < *ahead) ahead = c.arc;
    } else if (!behind || c.arc > *behind) {
      behind = c.arc;
    }
  }
  return ahead ? *ahead : *behind;
}

double map_match(const VehicleFix& fix, const TransitNetwork& net, std::optional<double> prev_arc) {
  const Route& r = net.route(fix.route);
  return map_match(r, geom::project_unchecked(fix.position, net.origin), prev_arc);
}

VehicleState update_vehicle(const std::optional<VehicleState>& state, const VehicleFix& fix,
                            const TransitNetwork& net) {
  if (!std::isfinite(fix.time)) throw Error(ErrorCode::StaleFix, "fix without a finite time");
  if (state && !(fix.time > state->last_fix_time)) {
    throw Error(ErrorCode::StaleFix, "fix for " + fix.vehicle + " not newer than the last one");
  }
  const Route& route = net.route(fix.route);
  const bool same_route = state && state->route == fix.route;
  const double arc = map_match(fix, net, same_route ? std::optional(state->last_fix_arc) : std::nullopt);

  VehicleState s;
  s.vehicle = fix.vehicle;
  s.route = fix.route;
  s.destination = route.destination();
  s.arc = arc;
  if (same_route) {
    const double dt = fix.time - state->last_fix_time;
    s.speed = std::clamp((arc - state->last_fix_arc) / dt, 0.0, kMaxSpeed);
  }
  s.last_fix_time = fix.time;
  s.last_fix_arc = arc;
  return s;
}

SnapshotEntry extrapolate(const VehicleState& state, double t, const TransitNetwork& net) {
  const Route& r = net.route(state.route);
  const double dt = std::max(0.0, t - state.last_fix_time);
  const double arc = std::min(state.last_fix_arc + state.speed * dt, r.length());
  const auto at = r.at(arc);
  return {state.vehicle, state.route, arc, at.position, at.heading, state.destination};
}

// -- tracker ------------------------------------------------------------------------

Tracker::Tracker(std::shared_ptr<const TransitNetwork> net)
    : net_(std::move(net)), version_(std::make_shared<const Version>()) {}

std::shared_ptr<const Tracker::Version> Tracker::current() const {
  std::lock_guard lock(mu_);
  return version_;
}

void Tracker::apply(const std::vector<VehicleFix>& batch, double clock) {
  auto next = std::make_shared<Version>(*current());
  for (const auto& fix : batch) {
    auto it = next->vehicles.find(fix.vehicle);
    std::optional<VehicleState> prev;
    if (it != next->vehicles.end()) prev = it->second;
    try {
      next->vehicles[fix.vehicle] = update_vehicle(prev, fix, *net_);
      ++next->counters.applied;
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::StaleFix: ++next->counters.stale; break;
        case ErrorCode::FixTooFar: ++next->counters.too_far; break;
        case ErrorCode::RouteUnknown: ++next->counters.unknown_route; break;
        default: throw;
      }
    }
  }
  next->clock = std::max(next->clock, clock);
  std::shared_ptr<const Version> published = std::move(next);
  std::lock_guard lock(mu_);
  version_ = std::move(published);
}

Snapshot Tracker::snapshot(const std::optional<geom::Rect>& bbox) const {
  const auto v = current();
  Snapshot s;
  s.time = v->clock;
  for (const auto& [id, state] : v->vehicles) {
    auto e = extrapolate(state, v->clock, *net_);
    if (bbox && !bbox->contains(e.position)) continue;
    s.vehicles.push_back(std::move(e));
  }
  return s;
}

double Tracker::clock() const { return current()->clock; }
Tracker::Counters Tracker::counters() const { return current()->counters; }

// -- replay -----------------------------------------------------------------------------

std::vector<VehicleFix> read_replay(std::string_view text) {
  std::vector<VehicleFix> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    std::istringstream ls(line);
    VehicleFix f;
    std::string extra;
    if (!(ls >> f.time >> f.vehicle >> f.route >> f.position.lat >> f.position.lon) || (ls >> extra) ||
        !std::isfinite(f.time))
      parse_fail(lineno, "expected 't vehicle route lat lon'");
    out.push_back(std::move(f));
  }
  std::stable_sort(out.begin(), out.end(), [](const VehicleFix& a, const VehicleFix& b) { return a.time < b.time; });
  return out;
}

ReplayDriver::ReplayDriver(Tracker& tracker, std::vector<VehicleFix> fixes)
    : tracker_(tracker), fixes_(std::move(fixes)) {}

void ReplayDriver::advance(double t) {
  std::vector<VehicleFix> batch;
  while (next_ < fixes_.size() && fixes_[next_].time <= t) batch.push_back(fixes_[next_++]);
  tracker_.apply(batch, t);
}

// -- wire format ---------------------------------------------------------------------------

std::optional<geom::Rect> parse_request(std::string_view line) {
  std::istringstream ls{trim(line)};
  std::string kw, extra;
  double x0, y0, x1, y1;
  if (!(ls >> kw) || kw != "SNAPSHOT") return std::nullopt;
  if (!(ls >> x0 >> y0 >> x1 >> y1) || (ls >> extra)) return std::nullopt;
  if (!std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) || !std::isfinite(y1)) return std::nullopt;
  if (x1 < x0 || y1 < y0) return std::nullopt;
  return geom::Rect(Point2D(x0, y0), Point2D(x1, y1));
}

std::string format_snapshot(const Snapshot& s) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "OK %.3f %zu\n", s.time, s.vehicles.size());
  out += buf;
  for (const auto& v : s.vehicles) {
    std::snprintf(buf, sizeof buf, " %.3f %.3f %.3f %.3f ", v.arc, v.position.x(), v.position.y(), v.heading);
    out += v.vehicle + " " + v.route + buf + v.destination + "\n";
  }
  out += "\n";
  return out;
}

std::string format_error(std::string_view message) { return "ERR " + std::string(message) + "\n\n"; }

Snapshot parse_snapshot(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty response");
  std::istringstream hs(line);
  std::string kw;
  Snapshot s;
  std::size_t count = 0;
  if (!(hs >> kw) || kw != "OK" || !(hs >> s.time >> count))
    throw Error(ErrorCode::ParseError, "bad response header: " + line);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "truncated snapshot");
    std::istringstream ls(line);
    SnapshotEntry e;
    double x, y;
    if (!(ls >> e.vehicle >> e.route >> e.arc >> x >> y >> e.heading))
      throw Error(ErrorCode::ParseError, "bad vehicle line: " + line);
    e.position = {x, y};
    std::string d;
    std::getline(ls, d);
    e.destination = trim(d);
    s.vehicles.push_back(std::move(e));
  }
  return s;
}

// -- server ---------------------------------------------------------------------------------

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

}  // namespace

Server::Server(const Tracker& tracker, int port, std::string bind_address) : tracker_(tracker) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::SourceUnavailable, std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, bind_address.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(ErrorCode::InvalidArgument, "bad bind address " + bind_address);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 64) < 0) {
    const std::string msg = std::strerror(errno);
    ::close(listen_fd_);
    throw Error(ErrorCode::SourceUnavailable, "bind/listen: " + msg);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(clients_mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    threads = std::move(clients_);
  }
  for (auto& t : threads) t.join();
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(clients_mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    clients_.emplace_back([this, fd] { serve_client(fd); });
  }
}

void Server::serve_client(int fd) {
  std::string buf;
  char chunk[4096];
  bool open = true;
  while (open) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buf.append(chunk, static_cast<std::size_t>(n));
    std::size_t nl;
    while (open && (nl = buf.find('\n')) != std::string::npos) {
      const std::string line = buf.substr(0, nl);
      buf.erase(0, nl + 1);
      std::string reply;
      if (auto bbox = parse_request(line)) reply = format_snapshot(tracker_.snapshot(*bbox));
      else reply = format_error("malformed request; expected 'SNAPSHOT <min-x> <min-y> <max-x> <max-y>'");
      open = send_all(fd, reply);
      ++served_;
    }
    if (buf.size() > 65536) {
      send_all(fd, format_error("request line too long"));
      break;
    }
  }
  std::lock_guard lock(clients_mu_);
  client_fds_.erase(std::remove(client_fds_.begin(), client_fds_.end(), fd), client_fds_.end());
  ::close(fd);
}

Client::Client(const std::string& host, int port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw Error(ErrorCode::SourceUnavailable, "cannot resolve " + host);
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  const bool ok = fd_ >= 0 && ::connect(fd_, res->ai_addr, res->ai_addrlen) == 0;
  ::freeaddrinfo(res);
  if (!ok) {
    if (fd_ >= 0) ::close(fd_);
    throw Error(ErrorCode::SourceUnavailable, "cannot connect to " + host + ":" + std::to_string(port));
  }
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

std::string Client::read_record() {
  char chunk[4096];
  for (;;) {
    // A record ends at the first empty line.
    std::size_t end = std::string::npos;
    if (pending_.rfind("\n", 0) == 0) end = 0;
    else if (auto p = pending_.find("\n\n"); p != std::string::npos) end = p + 1;
    if (end != std::string::npos) {
      std::string rec = pending_.substr(0, end);
      pending_.erase(0, end + 1);
      return rec;
    }
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::SourceUnavailable, "connection closed");
    pending_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string Client::raw(const std::string& line) {
  if (!send_all(fd_, line + "\n")) throw Error(ErrorCode::SourceUnavailable, "send failed");
  return read_record();
}

Snapshot Client::request(const geom::Rect& bbox) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "SNAPSHOT %.3f %.3f %.3f %.3f", bbox.min().x(), bbox.min().y(), bbox.max().x(),
                bbox.max().y());
  const std::string rec = raw(buf);
  if (rec.rfind("ERR", 0) == 0) throw Error(ErrorCode::ParseError, "server: " + trim(rec));
  return parse_snapshot(rec);
}

// -- client buffer ----------------------------------------------------------------------------

ClientBuffer::ClientBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity < 2) throw Error(ErrorCode::InvalidArgument, "client buffer capacity must be >= 2");
}

void ClientBuffer::push(double receive_time, Snapshot snapshot) {
  if (!ring_.empty() && !(receive_time > ring_.back().first))
    throw Error(ErrorCode::InvalidArgument, "buffer timestamps must increase");
  ring_.emplace_back(receive_time, std::move(snapshot));
  while (ring_.size() > capacity_) ring_.pop_front();
}

std::vector<FramePosition> ClientBuffer::interpolate(double t, const TransitNetwork& net) const {
  if (ring_.empty()) throw Error(ErrorCode::EmptyBuffer, "no snapshots buffered");
  auto frame = [&](const SnapshotEntry& e, double arc) {
    const auto at = net.route(e.route).at(arc);
    return FramePosition{e.vehicle, e.route, std::clamp(arc, 0.0, net.route(e.route).length()), at.position,
                         at.heading};
  };
  std::vector<FramePosition> out;
  if (t <= ring_.front().first || ring_.size() == 1 || t >= ring_.back().first) {
    const auto& s = t <= ring_.front().first ? ring_.front().second : ring_.back().second;
    for (const auto& e : s.vehicles) out.push_back(frame(e, e.arc));
    return out;
  }
  std::size_t i = 0;
  while (ring_[i + 1].first <= t) ++i;
  const auto& [t0, s0] = ring_[i];
  const auto& [t1, s1] = ring_[i + 1];
  const double f = (t - t0) / (t1 - t0);
  std::map<std::string, const SnapshotEntry*> later;
  for (const auto& e : s1.vehicles) later[e.vehicle] = &e;
  for (const auto& e : s0.vehicles) {
    auto it = later.find(e.vehicle);
    if (it == later.end() || it->second->route != e.route) {
      out.push_back(frame(e, e.arc));
      continue;
    }
    out.push_back(frame(e, e.arc + (it->second->arc - e.arc) * f));
  }
  return out;
}

}  // namespace geoscene::transit
