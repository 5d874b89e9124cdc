"""Authoring source for the shipped query repository and its metadata layer.

Regenerates src/soctriage/data/repo/*.jsonl from the literal query inventory
below and refuses to emit anything the shipped allow-lists reject, so the
packaged corpus always validates at 100%.

Run: python scripts/build_query_repo.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from soctriage.sqm import load_allowlist, validate_query

DATA = Path(__file__).resolve().parents[1] / "src" / "soctriage" / "data"

# (query_id, name, category, subcategory, use_case, description, tags, keywords, query)
AQL_QUERIES = [
    (
        "aql-001", "Failed login burst by source", "authentication", "brute_force",
        "Find sources with more than ten failed logins per account in the last day",
        "Groups authentication failures by source address and account and keeps pairs above a burst threshold.",
        ["authentication", "brute-force", "failed-login"],
        ["failed", "login", "burst", "brute", "force"],
        'SELECT sourceip, username, COUNT(*) AS "Failure Count" FROM events '
        "WHERE qid = 28250080 AND username IS NOT NULL "
        'GROUP BY sourceip, username HAVING COUNT(*) > 10 ORDER BY "Failure Count" DESC LAST 24 HOURS',
    ),
    (
        "aql-002", "Authentication failure spike", "authentication", "spike",
        "Show the top twenty sources by authentication failures over the last two hours",
        "Counts failure events per source over a short window to surface active password guessing.",
        ["authentication", "spike"],
        ["authentication", "failures", "top", "sources"],
        'SELECT sourceip, COUNT(*) AS "Attempts" FROM events WHERE category = 3004 '
        'GROUP BY sourceip ORDER BY "Attempts" DESC LIMIT 20 LAST 2 HOURS',
    ),
    (
        "aql-003", "After-hours admin logons", "authentication", "policy",
        "List admin account logons that happened outside business hours this week",
        "Filters logons for admin-pattern accounts with an event-time hour later than the configured cutoff.",
        ["admin", "after-hours", "policy"],
        ["admin", "logon", "after", "hours"],
        "SELECT username, sourceip, devicetime FROM events "
        "WHERE username LIKE '%admin%' AND DATEFORMAT(devicetime, 'HH') > '18' LAST 7 DAYS",
    ),
    (
        "aql-004", "Top outbound transfer pairs", "network", "exfiltration",
        "Rank source and destination pairs by total bytes sent out in the last day",
        "Aggregates flow source bytes per address pair to expose unusually large outbound transfers.",
        ["exfiltration", "flows", "bytes"],
        ["outbound", "bytes", "transfer", "exfil"],
        'SELECT sourceip, destinationip, SUM(sourcebytes) AS "Total Bytes" FROM flows '
        "WHERE NOT INCIDR('10.0.0.0/8', destinationip) "
        'GROUP BY sourceip, destinationip ORDER BY "Total Bytes" DESC LIMIT 50 LAST 1 DAYS',
    ),
    (
        "aql-005", "Large single outbound flows", "network", "exfiltration",
        "Show flows that moved more than fifty megabytes to external destinations in the last twelve hours",
        "Flags single flows with source bytes above a hard threshold toward non-RFC1918 space.",
        ["exfiltration", "flows"],
        ["large", "flow", "external", "destination"],
        "SELECT sourceip, destinationip, destinationport, sourcebytes FROM flows "
        "WHERE NOT INCIDR('10.0.0.0/8', destinationip) AND sourcebytes > 50000000 "
        "ORDER BY sourcebytes DESC LAST 12 HOURS",
    ),
    (
        "aql-006", "File hash search", "malware", "ioc_sweep",
        "Search the last month of events for a specific SHA256 file hash",
        "Sweeps event history for one indicator-of-compromise hash across all log sources.",
        ["malware", "hash", "ioc"],
        ["sha256", "hash", "indicator", "sweep"],
        "SELECT filename, sha256hash, sourceip FROM events "
        "WHERE sha256hash = 'e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855' LAST 30 DAYS",
    ),
    (
        "aql-007", "Event volume by category", "operations", "overview",
        "Break down event volume by category name for the last six hours",
        "Resolves category ids to names and counts events per category for a quick traffic overview.",
        ["overview", "category"],
        ["category", "volume", "breakdown"],
        'SELECT CATEGORYNAME(category) AS "Category", COUNT(*) AS "Events" FROM events '
        'GROUP BY category ORDER BY "Events" DESC LIMIT 10 LAST 6 HOURS',
    ),
    (
        "aql-008", "Port scan candidates", "network", "recon",
        "Find sources that touched more than one hundred distinct destination ports in the last hour",
        "Uses a distinct-count of destination ports per source as a port scanning heuristic.",
        ["recon", "portscan"],
        ["port", "scan", "distinct", "ports"],
        'SELECT sourceip, UNIQUECOUNT(destinationport) AS "Ports" FROM flows '
        "GROUP BY sourceip HAVING UNIQUECOUNT(destinationport) > 100 LAST 1 HOURS",
    ),
    (
        "aql-009", "VPN logins by geography", "authentication", "travel",
        "Count VPN logins per user and source country over the last week",
        "Groups VPN authentication events by user and source geography to support impossible-travel review.",
        ["vpn", "geography"],
        ["vpn", "login", "country", "geography"],
        'SELECT username, sourcegeographiclocation, COUNT(*) AS "Logins" FROM events '
        "WHERE logsourceid = 73 GROUP BY username, sourcegeographiclocation LAST 7 DAYS",
    ),
    (
        "aql-010", "Top firewall denies", "network", "firewall",
        "Show the most frequent denied connections by source, destination and port in the last four hours",
        "Counts deny events per connection tuple using the rule name to select firewall denials.",
        ["firewall", "deny"],
        ["firewall", "deny", "blocked", "connections"],
        'SELECT sourceip, destinationip, destinationport, COUNT(*) AS "Denies" FROM events '
        "WHERE QIDNAME(qid) LIKE '%Deny%' GROUP BY sourceip, destinationip, destinationport "
        'ORDER BY "Denies" DESC LIMIT 25 LAST 4 HOURS',
    ),
    (
        "aql-011", "DNS lookup fan-out", "network", "dns_tunneling",
        "Find hosts that resolved more than five hundred distinct names in the last day",
        "A distinct-count of queried names per source; very high fan-out suggests DNS tunneling or malware DGA.",
        ["dns", "tunneling", "dga"],
        ["dns", "lookups", "distinct", "tunneling"],
        'SELECT sourceip, UNIQUECOUNT(url) AS "Distinct Lookups" FROM events '
        "WHERE category = 18058 GROUP BY sourceip HAVING UNIQUECOUNT(url) > 500 LAST 24 HOURS",
    ),
    (
        "aql-012", "Payload keyword hunt", "endpoint", "living_off_the_land",
        "Search raw payloads for powershell activity in the last day",
        "Full-text search over event payloads for an attacker tooling keyword.",
        ["payload", "powershell", "hunt"],
        ["payload", "search", "powershell"],
        "SELECT sourceip, destinationip, UTF8(payload) FROM events "
        "WHERE TEXT SEARCH 'powershell' LAST 1 DAYS",
    ),
    (
        "aql-013", "High-severity identity events", "identity", "high_severity",
        "List recent high-severity events tied to an identity, newest first",
        "Selects identity-bearing events above a severity floor ordered by start time.",
        ["identity", "severity"],
        ["identity", "high", "severity"],
        "SELECT starttime, sourceip, eventname FROM events "
        "WHERE hasidentity = TRUE AND severity >= 8 ORDER BY starttime DESC LIMIT 100 LAST 3 DAYS",
    ),
    (
        "aql-014", "Privilege escalation events", "endpoint", "privilege_escalation",
        "Show privilege escalation events for non-system accounts in the last two days",
        "Matches known escalation event ids and excludes the local system account.",
        ["privilege", "escalation"],
        ["privilege", "escalation", "accounts"],
        "SELECT username, eventname, devicetime FROM events "
        "WHERE qid IN (5000475, 5000844) AND username NOT LIKE 'SYSTEM%' LAST 48 HOURS",
    ),
    (
        "aql-015", "Rare logon host pairs", "authentication", "rare_pairs",
        "Find user and host pairs that logged on fewer than three times in two weeks",
        "Low-frequency account-to-host logons often indicate lateral movement or stale credentials.",
        ["rare", "logon", "lateral"],
        ["rare", "logon", "host", "pair"],
        'SELECT identityhostname, username, COUNT(*) AS "Count" FROM events '
        "WHERE category = 3001 GROUP BY identityhostname, username HAVING COUNT(*) < 3 LAST 14 DAYS",
    ),
    (
        "aql-016", "Asymmetric byte ratios", "network", "exfiltration",
        "Show flows where outbound bytes exceed inbound bytes by a factor of one hundred in the last six hours",
        "Computes the outbound to inbound byte ratio per flow to catch one-way uploads.",
        ["bytes", "ratio", "exfiltration"],
        ["byte", "ratio", "asymmetric", "upload"],
        "SELECT sourceip, destinationip, sourcebytes, destinationbytes FROM flows "
        "WHERE destinationbytes > 0 AND sourcebytes / destinationbytes > 100 LAST 6 HOURS",
    ),
    (
        "aql-017", "Fixed-window magnitude review", "operations", "window",
        "Review events with magnitude seven or higher within an explicit time window",
        "Uses an absolute START and STOP window instead of a relative range.",
        ["window", "magnitude"],
        ["magnitude", "window", "start", "stop"],
        "SELECT sourceip, destinationip, magnitude FROM events "
        "WHERE magnitude >= 7 START '2024-03-01 00:00' STOP '2024-03-02 00:00'",
    ),
    (
        "aql-018", "Log source volume", "operations", "health",
        "Rank log sources by event volume over the last hour",
        "Resolves log source ids to names and counts events per source for ingestion health review.",
        ["health", "log-source"],
        ["log", "source", "volume", "health"],
        'SELECT LOGSOURCENAME(logsourceid) AS "Source", COUNT(*) AS "Volume" FROM events '
        'GROUP BY logsourceid ORDER BY "Volume" DESC LAST 1 HOURS',
    ),
    (
        "aql-019", "Concurrent session sources", "authentication", "account_sharing",
        "Find accounts that logged in from more than two distinct sources in the last hour",
        "A distinct-count of source addresses per account surfaces shared or stolen credentials.",
        ["sessions", "account-sharing"],
        ["concurrent", "sessions", "sources", "account"],
        'SELECT username, UNIQUECOUNT(sourceip) AS "Sources" FROM events '
        "WHERE category = 3001 GROUP BY username HAVING UNIQUECOUNT(sourceip) > 2 LAST 1 HOURS",
    ),
    (
        "aql-020", "Protocol byte breakdown", "network", "overview",
        "Break down total flow bytes by protocol over the last two hours",
        "Sums both directions of flow bytes per protocol for a bandwidth overview.",
        ["protocol", "bytes"],
        ["protocol", "bandwidth", "breakdown"],
        'SELECT PROTOCOLNAME(protocolid) AS "Protocol", SUM(sourcebytes + destinationbytes) AS "Bytes" '
        'FROM flows GROUP BY protocolid ORDER BY "Bytes" DESC LAST 2 HOURS',
    ),
    (
        "aql-021", "Most targeted assets", "network", "targeting",
        "Rank destination assets by high-severity hits in the last twelve hours",
        "Counts severe events per destination and resolves the asset hostname for context.",
        ["assets", "targeting"],
        ["targeted", "assets", "destination"],
        'SELECT destinationip, ASSETHOSTNAME(destinationip) AS "Asset", COUNT(*) AS "Hits" FROM events '
        'WHERE severity > 6 GROUP BY destinationip ORDER BY "Hits" DESC LIMIT 15 LAST 12 HOURS',
    ),
    (
        "aql-022", "Magnitude banding", "operations", "triage",
        "Band events into high, medium and low by magnitude for the last day",
        "A CASE expression labels each event with a triage band while keeping the raw magnitude.",
        ["triage", "banding"],
        ["magnitude", "band", "case"],
        "SELECT sourceip, CASE WHEN magnitude >= 8 THEN 'high' WHEN magnitude >= 5 THEN 'medium' "
        'ELSE \'low\' END AS "Band", magnitude FROM events WHERE magnitude > 0 '
        "ORDER BY magnitude DESC LAST 1 DAYS",
    ),
    (
        "aql-023", "Identity address mapping", "identity", "mapping",
        "List distinct user, identity address and source address combinations seen in the last four hours",
        "Deduplicated identity-to-address mapping for pivoting during investigations.",
        ["identity", "mapping"],
        ["identity", "mapping", "address"],
        "SELECT DISTINCT username, identityip, sourceip FROM events "
        "WHERE username IS NOT NULL AND identityip IS NOT NULL LAST 4 HOURS",
    ),
    (
        "aql-024", "Long-lived flows", "network", "persistence",
        "Show flows lasting longer than one hour in the last day",
        "Long sessions to a single peer can indicate tunnels or interactive command and control.",
        ["flows", "duration", "c2"],
        ["long", "flow", "duration", "session"],
        "SELECT sourceip, destinationip, flowduration FROM flows "
        "WHERE flowduration > 3600000 ORDER BY flowduration DESC LIMIT 30 LAST 1 DAYS",
    ),
    (
        "aql-025", "Paste-site visits", "network", "data_leak",
        "Count visits per source to paste sites over the last week",
        "Case-insensitive URL match for a known paste domain family, grouped by source.",
        ["url", "paste", "leak"],
        ["pastebin", "url", "visits"],
        'SELECT sourceip, url, COUNT(*) AS "Visits" FROM events '
        "WHERE url ILIKE '%pastebin%' GROUP BY sourceip, url LAST 7 DAYS",
    ),
    (
        "aql-026", "Service account auth timeline", "authentication", "service_accounts",
        "Show the authentication timeline for service accounts over the last day",
        "Chronological auth successes and failures for svc-prefixed accounts.",
        ["service-account", "timeline"],
        ["service", "account", "timeline"],
        "SELECT username, sourceip, eventname, devicetime FROM events "
        "WHERE category IN (3001, 3004) AND username LIKE 'svc%' ORDER BY devicetime ASC LAST 24 HOURS",
    ),
    (
        "aql-027", "MAC address with many IPs", "network", "spoofing",
        "Find MAC addresses that presented more than one source address in the last day",
        "A distinct-count of source addresses per MAC flags DHCP churn or ARP spoofing.",
        ["mac", "spoofing"],
        ["mac", "address", "spoofing"],
        'SELECT sourcemac, UNIQUECOUNT(sourceip) AS "IPs" FROM events '
        "GROUP BY sourcemac HAVING UNIQUECOUNT(sourceip) > 1 LAST 24 HOURS",
    ),
]

YARAL_QUERIES = [
    (
        "yaral-001", "Failed login burst", "authentication", "brute_force",
        "Detect more than ten blocked logins for one account within ten minutes",
        "Windows the blocked USER_LOGIN events per target account and counts attempts.",
        ["authentication", "brute-force"],
        ["failed", "login", "burst", "brute"],
        '''rule failed_login_burst {
  meta:
    author = "soc"
    description = "Burst of blocked logins against one account"
    severity = "Medium"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.security_result.action = "BLOCK"
    $user = $e.target.user.userid
  match:
    $user over 10m
  outcome:
    $attempts = count($e.metadata.id)
  condition:
    $e and $attempts > 10
}''',
    ),
    (
        "yaral-002", "Connection to watched address", "network", "c2",
        "Alert on any network connection to a specific watched address",
        "Single-event match on a known command-and-control destination.",
        ["c2", "watchlist"],
        ["connection", "watchlist", "c2"],
        '''rule watched_address_connection {
  meta:
    author = "soc"
    description = "Outbound connection to a watched address"
    severity = "High"
  events:
    $e.metadata.event_type = "NETWORK_CONNECTION"
    $e.target.ip = "203.0.113.55"
  condition:
    $e
}''',
    ),
    (
        "yaral-003", "DNS fan-out per host", "network", "dns_tunneling",
        "Flag hosts resolving more than two hundred distinct names in thirty minutes",
        "Counts distinct queried names per principal host over a sliding window.",
        ["dns", "tunneling"],
        ["dns", "fanout", "distinct", "names"],
        '''rule dns_fanout {
  meta:
    author = "soc"
    description = "Excessive distinct DNS lookups from one host"
    severity = "Medium"
  events:
    $e.metadata.event_type = "NETWORK_DNS"
    $host = $e.principal.hostname
  match:
    $host over 30m
  outcome:
    $names = count_distinct($e.network.dns.questions.name)
  condition:
    $e and $names > 200
}''',
    ),
    (
        "yaral-004", "Encoded PowerShell command", "endpoint", "living_off_the_land",
        "Detect PowerShell launched with an encoded command argument",
        "Regex over the process command line for the encodedcommand flag, case-insensitive.",
        ["powershell", "encoded"],
        ["powershell", "encoded", "command"],
        '''rule encoded_powershell {
  meta:
    author = "soc"
    description = "PowerShell started with an encoded command"
    severity = "High"
  events:
    $e.metadata.event_type = "PROCESS_LAUNCH"
    re.regex($e.principal.process.command_line, `powershell.*encodedcommand`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-005", "Impossible travel logins", "authentication", "travel",
        "Find one account logging in from two countries within an hour",
        "Joins two login events on the account and requires differing source countries.",
        ["travel", "geo"],
        ["impossible", "travel", "country", "login"],
        '''rule impossible_travel {
  meta:
    author = "soc"
    description = "Same account, two countries, one hour"
    severity = "High"
  events:
    $a.metadata.event_type = "USER_LOGIN"
    $b.metadata.event_type = "USER_LOGIN"
    $a.principal.user.userid = $user
    $b.principal.user.userid = $user
    $a.principal.location.country_or_region != $b.principal.location.country_or_region
  match:
    $user over 1h
  condition:
    $a and $b
}''',
    ),
    (
        "yaral-006", "Known bad file hash", "malware", "ioc_sweep",
        "Alert when a specific SHA256 appears in any file event",
        "Single-indicator sweep across file telemetry.",
        ["malware", "hash"],
        ["sha256", "hash", "file"],
        '''rule known_bad_hash {
  meta:
    author = "soc"
    description = "Known malicious file hash observed"
    severity = "Critical"
  events:
    $e.target.file.sha256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855" nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-007", "Large outbound transfer", "network", "exfiltration",
        "Detect hosts sending more than one hundred megabytes outbound in one hour",
        "Sums outbound bytes per principal host over an hour window.",
        ["exfiltration", "bytes"],
        ["outbound", "bytes", "exfil"],
        '''rule large_outbound_transfer {
  meta:
    author = "soc"
    description = "Host exceeded outbound byte budget"
    severity = "High"
  events:
    $e.metadata.event_type = "NETWORK_CONNECTION"
    $host = $e.principal.hostname
  match:
    $host over 1h
  outcome:
    $outbound = sum($e.network.bytes_outbound)
  condition:
    $e and $outbound > 100000000
}''',
    ),
    (
        "yaral-008", "Rare admin tool launch", "endpoint", "admin_tools",
        "Alert when psexec runs on any production host",
        "Command-line regex for a remote-execution utility.",
        ["admin-tools", "lateral"],
        ["psexec", "remote", "execution"],
        '''rule psexec_launch {
  meta:
    author = "soc"
    description = "Remote execution utility observed"
    severity = "Medium"
  events:
    $e.metadata.event_type = "PROCESS_LAUNCH"
    re.regex($e.principal.process.command_line, `psexec`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-009", "Login to dormant account", "identity", "dormant",
        "Detect successful logins to accounts marked dormant",
        "Matches the allow action against a dormant-account naming convention.",
        ["dormant", "identity"],
        ["dormant", "account", "login"],
        '''rule dormant_account_login {
  meta:
    author = "soc"
    description = "Dormant account authenticated successfully"
    severity = "Medium"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.security_result.action = "ALLOW"
    re.regex($e.target.user.userid, `dormant_.*`)
  condition:
    $e
}''',
    ),
    (
        "yaral-010", "Multiple hosts touched by one user", "identity", "lateral_movement",
        "Find users authenticating to more than five hosts within fifteen minutes",
        "Counts distinct target hosts per user over a short window.",
        ["lateral", "identity"],
        ["lateral", "movement", "hosts", "user"],
        '''rule user_touches_many_hosts {
  meta:
    author = "soc"
    description = "Account fanned out across hosts"
    severity = "High"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $user = $e.target.user.userid
  match:
    $user over 15m
  outcome:
    $hosts = count_distinct($e.target.hostname)
  condition:
    $e and $hosts > 5
}''',
    ),
    (
        "yaral-011", "HTTP POST to raw address", "network", "c2",
        "Detect HTTP POST requests sent directly to an IP address instead of a domain",
        "Regex over the target URL for an address-literal POST, a common beacon trait.",
        ["http", "beacon"],
        ["http", "post", "raw", "ip"],
        '''rule http_post_to_raw_ip {
  meta:
    author = "soc"
    description = "POST issued to an address-literal URL"
    severity = "Medium"
  events:
    $e.metadata.event_type = "NETWORK_HTTP"
    $e.network.http.method = "POST"
    re.regex($e.target.url, `http://[0-9]+\\.[0-9]+\\.[0-9]+\\.[0-9]+/`)
  condition:
    $e
}''',
    ),
    (
        "yaral-012", "Repeated blocked outbound", "network", "policy",
        "Find hosts with more than fifty blocked outbound connections in ten minutes",
        "Counts firewall blocks per principal host over a sliding window.",
        ["firewall", "blocked"],
        ["blocked", "outbound", "firewall"],
        '''rule repeated_blocked_outbound {
  meta:
    author = "soc"
    description = "Host repeatedly blocked at the egress firewall"
    severity = "Low"
  events:
    $e.metadata.event_type = "NETWORK_CONNECTION"
    $e.security_result.action = "BLOCK"
    $host = $e.principal.hostname
  match:
    $host over 10m
  outcome:
    $blocks = count($e.metadata.id)
  condition:
    $e and $blocks > 50
}''',
    ),
    (
        "yaral-013", "Suspicious TLD lookup", "network", "dns",
        "Alert on DNS lookups for rarely used top level domains",
        "Regex over queried names for a risky TLD set.",
        ["dns", "tld"],
        ["dns", "tld", "suspicious"],
        '''rule suspicious_tld_lookup {
  meta:
    author = "soc"
    description = "Lookup against a high-risk TLD"
    severity = "Low"
  events:
    $e.metadata.event_type = "NETWORK_DNS"
    re.regex($e.network.dns.questions.name, `\\.(zip|mov|country|stream)$`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-014", "Login outside business hours", "authentication", "policy",
        "Detect interactive logins between midnight and five in the morning",
        "Compares the event-hour against a night window.",
        ["after-hours", "policy"],
        ["night", "login", "hours"],
        '''rule night_login {
  meta:
    author = "soc"
    description = "Interactive login during the night window"
    severity = "Low"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.security_result.action = "ALLOW"
    timestamp.get_hour($e.metadata.id) < 5
  condition:
    $e
}''',
    ),
    (
        "yaral-015", "New country for account", "authentication", "travel",
        "Track accounts seen from an embargoed country",
        "Matches the source country against a fixed high-risk list.",
        ["geo", "travel"],
        ["country", "embargo", "login"],
        '''rule embargoed_country_login {
  meta:
    author = "soc"
    description = "Login sourced from an embargoed region"
    severity = "High"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.principal.location.country_or_region in ("KP", "IR")
  condition:
    $e
}''',
    ),
    (
        "yaral-016", "Mass file deletion", "endpoint", "ransomware",
        "Detect more than two hundred file deletions on one host in five minutes",
        "Counts deletion events per host over a tight window, a ransomware tell.",
        ["ransomware", "deletion"],
        ["file", "deletion", "mass", "ransomware"],
        '''rule mass_file_deletion {
  meta:
    author = "soc"
    description = "File deletion burst on a single host"
    severity = "Critical"
  events:
    $e.metadata.event_type = "FILE_DELETION"
    $host = $e.principal.hostname
  match:
    $host over 5m
  outcome:
    $deletions = count($e.metadata.id)
  condition:
    $e and $deletions > 200
}''',
    ),
    (
        "yaral-017", "Setuid shell spawn", "endpoint", "privilege_escalation",
        "Alert when a shell is spawned by a web server process",
        "Parent-child regex pair that catches web shells.",
        ["webshell", "escalation"],
        ["shell", "web", "server", "spawn"],
        '''rule webserver_spawns_shell {
  meta:
    author = "soc"
    description = "Web server process spawned an interactive shell"
    severity = "Critical"
  events:
    $e.metadata.event_type = "PROCESS_LAUNCH"
    re.regex($e.principal.process.file.full_path, `(nginx|httpd|apache2)`)
    re.regex($e.target.process.command_line, `/bin/(ba)?sh`)
  condition:
    $e
}''',
    ),
    (
        "yaral-018", "Cloud console login without MFA", "identity", "cloud",
        "Detect console logins where the MFA product field is absent",
        "Uses a product-event match plus a regex that the summary lacks an MFA marker.",
        ["cloud", "mfa"],
        ["console", "login", "mfa"],
        '''rule console_login_no_mfa {
  meta:
    author = "soc"
    description = "Console login without an MFA marker"
    severity = "Medium"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.metadata.product_name = "CloudConsole"
    not re.regex($e.security_result.summary, `mfa`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-019", "Internal scanner detection", "network", "recon",
        "Find internal hosts connecting to more than thirty distinct ports in five minutes",
        "Counts distinct target ports per source host over a short window.",
        ["recon", "portscan"],
        ["scan", "ports", "internal"],
        '''rule internal_port_scan {
  meta:
    author = "soc"
    description = "Internal host sweeping ports"
    severity = "Medium"
  events:
    $e.metadata.event_type = "NETWORK_CONNECTION"
    net.ip_in_range_cidr($e.principal.ip, "10.0.0.0/8")
    $host = $e.principal.hostname
  match:
    $host over 5m
  outcome:
    $ports = count_distinct($e.target.port)
  condition:
    $e and $ports > 30
}''',
    ),
    (
        "yaral-020", "Base64 in command line", "endpoint", "obfuscation",
        "Detect long base64 blobs passed on a process command line",
        "Regex for long base64 runs in command lines, a droppers-and-loaders tell.",
        ["obfuscation", "base64"],
        ["base64", "command", "line"],
        '''rule base64_command_line {
  meta:
    author = "soc"
    description = "Long base64 run inside a command line"
    severity = "Medium"
  events:
    $e.metadata.event_type = "PROCESS_LAUNCH"
    re.regex($e.principal.process.command_line, `[A-Za-z0-9+/]{120,}`)
  condition:
    $e
}''',
    ),
    (
        "yaral-021", "Privileged group change", "identity", "persistence",
        "Alert on modifications to administrative groups",
        "Single-event match on group-modification telemetry filtered to admin groups.",
        ["persistence", "groups"],
        ["admin", "group", "change"],
        '''rule privileged_group_change {
  meta:
    author = "soc"
    description = "Administrative group membership changed"
    severity = "High"
  events:
    $e.metadata.event_type = "GROUP_MODIFICATION"
    re.regex($e.target.user.userid, `(domain admins|administrators)`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-022", "Repeated MFA denials", "identity", "mfa_fatigue",
        "Detect more than five MFA denials for one user in ten minutes",
        "Counts MFA push denials per account, the fatigue-attack signature.",
        ["mfa", "fatigue"],
        ["mfa", "denials", "push"],
        '''rule mfa_fatigue {
  meta:
    author = "soc"
    description = "MFA denial burst for one account"
    severity = "High"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    $e.metadata.product_event_type = "MFA_DENY"
    $user = $e.target.user.userid
  match:
    $user over 10m
  outcome:
    $denials = count($e.metadata.id)
  condition:
    $e and $denials > 5
}''',
    ),
    (
        "yaral-023", "Archive tool on server", "endpoint", "staging",
        "Detect archive utilities running on server assets",
        "Archive tooling on servers often stages data before exfiltration.",
        ["staging", "archive"],
        ["archive", "staging", "server"],
        '''rule archive_on_server {
  meta:
    author = "soc"
    description = "Archive utility executed on a server asset"
    severity = "Medium"
  events:
    $e.metadata.event_type = "PROCESS_LAUNCH"
    re.regex($e.principal.process.file.full_path, `(7z|winrar|tar)`) nocase
    re.regex($e.principal.hostname, `^srv-`)
  condition:
    $e
}''',
    ),
    (
        "yaral-024", "Download from new domain burst", "network", "delivery",
        "Flag hosts downloading executables from more than three distinct domains in one hour",
        "Counts distinct serving domains per host for executable fetches.",
        ["delivery", "downloads"],
        ["download", "executable", "domains"],
        '''rule exe_download_burst {
  meta:
    author = "soc"
    description = "Executable fetches from many distinct domains"
    severity = "Medium"
  events:
    $e.metadata.event_type = "NETWORK_HTTP"
    re.regex($e.target.url, `\\.exe$`) nocase
    $host = $e.principal.hostname
  match:
    $host over 1h
  outcome:
    $domains = count_distinct($e.target.domain.name)
  condition:
    $e and $domains > 3
}''',
    ),
    (
        "yaral-025", "Service account interactive login", "identity", "service_accounts",
        "Alert when a service account logs in interactively",
        "Service principals should never hold interactive sessions.",
        ["service-account", "policy"],
        ["service", "account", "interactive"],
        '''rule service_account_interactive {
  meta:
    author = "soc"
    description = "Interactive session for a service principal"
    severity = "High"
  events:
    $e.metadata.event_type = "USER_LOGIN"
    re.regex($e.target.user.userid, `^svc_`)
    $e.metadata.product_event_type = "INTERACTIVE"
  condition:
    $e
}''',
    ),
    (
        "yaral-026", "Lookup of newly registered domain list", "network", "delivery",
        "Detect DNS answers matching a curated newly registered domain pattern",
        "Regex family for throwaway domain shapes used in phishing waves.",
        ["dns", "phishing"],
        ["new", "domain", "phishing"],
        '''rule young_domain_lookup {
  meta:
    author = "soc"
    description = "Lookup matching a young-domain naming family"
    severity = "Low"
  events:
    $e.metadata.event_type = "NETWORK_DNS"
    re.regex($e.network.dns.questions.name, `(login|verify|secure)-[a-z0-9]{6,}\\.`) nocase
  condition:
    $e
}''',
    ),
    (
        "yaral-027", "Two-stage drop and run", "endpoint", "delivery",
        "Correlate a file write followed by execution of the same path on one host",
        "Joins a file-creation and a process-launch event on the host and file path.",
        ["delivery", "correlation"],
        ["drop", "execute", "correlation"],
        '''rule drop_then_execute {
  meta:
    author = "soc"
    description = "File written then executed on the same host"
    severity = "High"
  events:
    $w.metadata.event_type = "FILE_CREATION"
    $x.metadata.event_type = "PROCESS_LAUNCH"
    $w.principal.hostname = $host
    $x.principal.hostname = $host
    $w.target.file.full_path = $x.principal.process.file.full_path
  match:
    $host over 30m
  condition:
    $w and $x
}''',
    ),
]


def emit(platform: str, inventory) -> None:
    allowlist = load_allowlist(platform, DATA / "allowlists" / f"{platform}.json")
    failures = []
    queries_path = DATA / "repo" / f"{platform}_queries.jsonl"
    metadata_path = DATA / "repo" / f"{platform}_metadata.jsonl"
    with open(queries_path, "w", encoding="utf-8") as qf, open(metadata_path, "w", encoding="utf-8") as mf:
        for query_id, name, category, subcategory, use_case, description, tags, keywords, query in inventory:
            report = validate_query(query, allowlist)
            if not report.passed:
                failures.append((query_id, report.violations))
                continue
            qf.write(json.dumps(
                {"query_id": query_id, "platform": platform, "query": query}, sort_keys=True) + "\n")
            mf.write(json.dumps({
                "query_id": query_id, "name": name, "category": category,
                "subcategory": subcategory, "use_case": use_case,
                "description": description, "tags": tags, "search_keywords": keywords,
            }, sort_keys=True) + "\n")
    if failures:
        for query_id, violations in failures:
            print(f"REJECTED {query_id}:")
            for v in violations:
                print(f"  {v.kind}: {v.token!r} at {v.position}")
        raise SystemExit(f"{len(failures)} {platform} queries failed validation")
    print(f"{platform}: {len(inventory)} queries validated and written")


if __name__ == "__main__":
    emit("qradar_aql", AQL_QUERIES)
    emit("secops_yaral", YARAL_QUERIES)
