#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "geoscene/geom.hpp"

namespace geoscene::transit {

using geom::Point2D;

inline constexpr double kMaxSpeed = 40.0;     ///< m/s
inline constexpr double kMaxMatchDist = 50.0;  ///< m, map-match gate

struct Stop {
  std::string name;
  double arc = 0.0;
};

struct PolylinePoint {
  Point2D position;
  double heading = 0.0;  ///< degrees counter-clockwise from +x, [0, 360)
  std::size_t segment = 0;
};

class Route {
 public:
  Route() = default;
  /// Throws InvalidRoute for < 2 points or a zero-length segment.
  Route(std::string id, std::vector<Point2D> points, std::string destination = {});

  const std::string& id() const { return id_; }
  const std::string& destination() const { return destination_; }
  const std::vector<Point2D>& points() const { return points_; }
  const std::vector<double>& cumulative() const { return cum_; }
  const std::vector<Stop>& stops() const { return stops_; }
  double length() const { return cum_.back(); }

  /// Position at arc length (clamped into [0, length]).
  PolylinePoint at(double arc) const;
  /// Arc of the closest polyline point to p.
  double project(const Point2D& p, double* distance = nullptr) const;
  void add_stop(std::string name, double arc);

 private:
  std::string id_;
  std::string destination_;
  std::vector<Point2D> points_;
  std::vector<double> cum_;
  std::vector<Stop> stops_;
};

struct TransitNetwork {
  geom::GeoPoint origin;
  std::vector<std::string> agencies;
  std::map<std::string, Route> routes;

  const Route& route(const std::string& id) const;  ///< RouteUnknown
};

/// Line document: "origin <lat> <lon>", "agency <label>",
/// "route <id> <destination>" ... "end". Inside a route: "point <lat> <lon>",
/// "xy <x> <y>" (scene metres), "stop <lat> <lon> <name>",
/// "stop_xy <x> <y> <name>". '#' starts a comment. Throws ParseError or
/// InvalidRoute.
TransitNetwork load_network(std::string_view document);

struct VehicleFix {
  std::string vehicle;
  std::string route;
  geom::GeoPoint position;
  double time = 0.0;
};

struct VehicleState {
  std::string vehicle;
  std::string route;
  double arc = 0.0;
  double speed = 0.0;
  std::string destination;
  double last_fix_time = 0.0;
  double last_fix_arc = 0.0;
};

/// Arc of the closest route point to p. Among candidates equidistant within
/// 1e-6 m, the smallest arc >= prev_arc wins, else the largest arc.
/// Throws FixTooFar beyond d_max.
double map_match(const Route& route, const Point2D& p, std::optional<double> prev_arc = std::nullopt,
                 double d_max = kMaxMatchDist);
double map_match(const VehicleFix& fix, const TransitNetwork& net, std::optional<double> prev_arc = std::nullopt);

/// First fix (no state) starts at speed 0. A route change resets the speed.
/// Throws StaleFix unless fix.time > last_fix_time.
VehicleState update_vehicle(const std::optional<VehicleState>& state, const VehicleFix& fix,
                            const TransitNetwork& net);

struct SnapshotEntry {
  std::string vehicle;
  std::string route;
  double arc = 0.0;
  Point2D position = Point2D::Zero();
  double heading = 0.0;
  std::string destination;
};

struct Snapshot {
  double time = 0.0;
  std::vector<SnapshotEntry> vehicles;  ///< sorted by vehicle id
};

/// arc = min(last_fix_arc + speed * (t - last_fix_time), length); t before the
/// last fix is treated as the fix time.
SnapshotEntry extrapolate(const VehicleState& state, double t, const TransitNetwork& net);

/// Vehicle states behind a copy-on-write pointer: one writer publishes whole
/// batches with their clock, readers always see one complete version.
class Tracker {
 public:
  explicit Tracker(std::shared_ptr<const TransitNetwork> net);

  struct Counters {
    std::size_t applied = 0;
    std::size_t stale = 0;
    std::size_t too_far = 0;
    std::size_t unknown_route = 0;
  };

  /// Applies fixes in order and publishes them together with `clock`
  /// (which never moves backward). Bad fixes are dropped and counted.
  void apply(const std::vector<VehicleFix>& batch, double clock);
  void advance_clock(double clock) { apply({}, clock); }

  /// Extrapolated to the published clock; optional bbox filter.
  Snapshot snapshot(const std::optional<geom::Rect>& bbox = std::nullopt) const;
  double clock() const;
  Counters counters() const;
  const TransitNetwork& network() const { return *net_; }

 private:
  struct Version {
    double clock = 0.0;
    std::map<std::string, VehicleState> vehicles;
    Counters counters;
  };
  std::shared_ptr<const Version> current() const;

  std::shared_ptr<const TransitNetwork> net_;
  mutable std::mutex mu_;
  std::shared_ptr<const Version> version_;
};

/// Replay file: one fix per line "t vehicle route lat lon". Sorted by time
/// (stable). Throws ParseError.
std::vector<VehicleFix> read_replay(std::string_view text);

/// Feeds a recorded fix list into a tracker as the feed clock advances.
class ReplayDriver {
 public:
  ReplayDriver(Tracker& tracker, std::vector<VehicleFix> fixes);
  /// Applies every fix with time <= t and publishes clock t.
  void advance(double t);
  bool finished() const { return next_ >= fixes_.size(); }
  double start_time() const { return fixes_.empty() ? 0.0 : fixes_.front().time; }
  double end_time() const { return fixes_.empty() ? 0.0 : fixes_.back().time; }

 private:
  Tracker& tracker_;
  std::vector<VehicleFix> fixes_;
  std::size_t next_ = 0;
};

// -- wire protocol -------------------------------------------------------------

/// "SNAPSHOT <min-x> <min-y> <max-x> <max-y>" -> bbox; nullopt if malformed.
std::optional<geom::Rect> parse_request(std::string_view line);
/// "OK <time> <count>", one "id route arc x y heading destination" line per
/// vehicle (3 decimals), then a blank line.
std::string format_snapshot(const Snapshot& s);
std::string format_error(std::string_view message);
/// Inverse of format_snapshot (without the trailing blank line handling).
Snapshot parse_snapshot(std::string_view text);

/// Thread-per-connection TCP server answering SNAPSHOT requests from a
/// tracker. Port 0 picks a free port.
class Server {
 public:
  Server(const Tracker& tracker, int port, std::string bind_address = "127.0.0.1");
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  int port() const { return port_; }
  void stop();
  std::size_t requests_served() const { return served_.load(); }

 private:
  void accept_loop();
  void serve_client(int fd);

  const Tracker& tracker_;
  int listen_fd_ = -1;
  int port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::size_t> served_{0};
  std::thread acceptor_;
  std::mutex clients_mu_;
  std::vector<std::thread> clients_;
  std::vector<int> client_fds_;
};

/// Blocking line-protocol client.
class Client {
 public:
  Client(const std::string& host, int port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  Snapshot request(const geom::Rect& bbox);
  /// Sends a raw line and returns the response record (up to the blank line).
  std::string raw(const std::string& line);

 private:
  std::string read_record();
  int fd_ = -1;
  std::string pending_;
};

// -- client-side frame interpolation ---------------------------------------------

struct FramePosition {
  std::string vehicle;
  std::string route;
  double arc = 0.0;
  Point2D position = Point2D::Zero();
  double heading = 0.0;
};

/// Ring of (receive time, snapshot). Positions are rebuilt from route + arc
/// so interpolated vehicles stay on their polylines.
class ClientBuffer {
 public:
  explicit ClientBuffer(std::size_t capacity = 8);  ///< InvalidArgument below 2

  /// InvalidArgument unless receive_time exceeds the newest entry.
  void push(double receive_time, Snapshot snapshot);
  std::size_t size() const { return ring_.size(); }

  /// Arc-linear interpolation between the bracketing snapshots; before the
  /// first entry the first is used, after the last the last is held.
  /// Vehicles missing from one side or switching routes hold the earlier
  /// entry. Throws EmptyBuffer.
  std::vector<FramePosition> interpolate(double t, const TransitNetwork& net) const;

 private:
  std::size_t capacity_;
  std::deque<std::pair<double, Snapshot>> ring_;
};

}  // namespace geoscene::transit
